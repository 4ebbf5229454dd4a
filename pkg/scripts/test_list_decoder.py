# scripts/test_list_decoder.py

import sys
import os

import numpy as np
import pytest

# --- Boilerplate to make sibling packages accessible ---
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)
# ---------------------------------------------------

from app.core.adjacent_channels import TEST_MAX_OUTPUTS
from app.core.channel_model import awgn_noise_variance, discretize_biawgn
from app.core.construction import CodeSpec, construct
from app.core.crc import crc_append, crc_remainder, crc_scheme
from app.core.encoder import build_generator_matrix, encode, scatter_message
from app.core.list_decoder import path_log_probability, rank_with_ties, scl_decode, select_path
from app.core.sc_decoder import ChannelPriors, sc_decode
from oracles import codeword_log_likelihood, ml_decode, noisy_priors, random_code_spec

FIXTURE_PATH = os.path.join(project_root, 'codes', 'abs_plus_16_8.json')


@pytest.fixture(scope="module")
def fixture_spec():
    with open(FIXTURE_PATH, encoding='utf-8') as f:
        return CodeSpec.from_json(f.read())


def awgn_priors(codeword, ebn0_db: float, rate: float, rng) -> ChannelPriors:
    variance = awgn_noise_variance(ebn0_db, rate)
    received = 1.0 - 2.0 * np.asarray(codeword) + rng.normal(0.0, np.sqrt(variance), len(codeword))
    return ChannelPriors.from_awgn(received, variance)


def test_list_of_one_is_sc():
    rng = np.random.default_rng(31)
    spec = random_code_spec(64, 32, rng, random_frozen=True)
    for _ in range(300):
        priors = awgn_priors(encode(spec, rng.integers(0, 2, 32)), 1.5, 0.5, rng)
        list_message, report = scl_decode(spec, priors, 1)
        sc_message, sc_codeword = sc_decode(spec, priors)
        np.testing.assert_array_equal(list_message, sc_message)
        np.testing.assert_array_equal(report.codeword, sc_codeword)
        assert report.metrics.shape == (1,)


def test_ranking_groups_near_ties():
    totals = np.array([-1.0, -1.0 + 1e-14, -0.5, -np.inf, -np.inf, -1.0 - 1e-6])
    np.testing.assert_array_equal(rank_with_ties(totals), [2, 0, 1, 5, 3, 4])
    np.testing.assert_array_equal(rank_with_ties(np.full(3, -np.inf)), [0, 1, 2])


def test_list_of_one_is_sc_on_tied_bsc_priors():
    rng = np.random.default_rng(12)
    spec = random_code_spec(16, 8, rng)
    for _ in range(50):
        priors = noisy_priors(encode(spec, rng.integers(0, 2, 8)), 0.1, rng)
        sc_message = sc_decode(spec, priors)[0]
        np.testing.assert_array_equal(sc_decode(spec, priors, normalize=False)[0], sc_message)
        np.testing.assert_array_equal(scl_decode(spec, priors, 1)[0], sc_message)


@pytest.mark.slow
def test_list_of_one_is_sc_on_a_constructed_code():
    channel = discretize_biawgn(2.0, 0.5)
    spec = construct(256, 128, channel, TEST_MAX_OUTPUTS)
    rng = np.random.default_rng(2)
    for _ in range(10000):
        priors = awgn_priors(encode(spec, rng.integers(0, 2, 128)), 2.0, 0.5, rng)
        np.testing.assert_array_equal(scl_decode(spec, priors, 1)[0], sc_decode(spec, priors)[0])


def test_exhaustive_list_is_maximum_likelihood(fixture_spec):
    rng = np.random.default_rng(17)
    generator = build_generator_matrix(fixture_spec)
    for _ in range(300):
        priors = noisy_priors(encode(fixture_spec, rng.integers(0, 2, 8)), 0.08, rng)
        message, report = scl_decode(fixture_spec, priors, 256)
        _, best = ml_decode(fixture_spec, generator, priors)
        assert codeword_log_likelihood(priors, encode(fixture_spec, message)) == pytest.approx(best, abs=1e-9)
        np.testing.assert_array_equal(report.codeword, encode(fixture_spec, message))


@pytest.mark.slow
def test_exhaustive_list_is_maximum_likelihood_long_run(fixture_spec):
    rng = np.random.default_rng(18)
    generator = build_generator_matrix(fixture_spec)
    for _ in range(1000):
        priors = awgn_priors(encode(fixture_spec, rng.integers(0, 2, 8)), 1.0, 0.5, rng)
        message, _ = scl_decode(fixture_spec, priors, 256)
        _, best = ml_decode(fixture_spec, generator, priors)
        assert codeword_log_likelihood(priors, encode(fixture_spec, message)) == pytest.approx(best, abs=1e-9)


def test_metric_is_the_message_log_probability(fixture_spec):
    rng = np.random.default_rng(5)
    priors = noisy_priors(encode(fixture_spec, rng.integers(0, 2, 8)), 0.1, rng)
    _, report = scl_decode(fixture_spec, priors, 8)
    assert path_log_probability(fixture_spec, priors, report.u_hat) == pytest.approx(report.metric, abs=1e-9)

    # metric differences are log-likelihood differences of the codewords
    first, second = rng.integers(0, 2, 8), rng.integers(0, 2, 8)
    gap = (path_log_probability(fixture_spec, priors, scatter_message(fixture_spec, first))
           - path_log_probability(fixture_spec, priors, scatter_message(fixture_spec, second)))
    expected = (codeword_log_likelihood(priors, encode(fixture_spec, first))
                - codeword_log_likelihood(priors, encode(fixture_spec, second)))
    assert gap == pytest.approx(expected, abs=1e-9)


def test_short_lists_never_beat_the_exhaustive_list(fixture_spec):
    rng = np.random.default_rng(23)
    for _ in range(50):
        priors = noisy_priors(encode(fixture_spec, rng.integers(0, 2, 8)), 0.15, rng)
        best = scl_decode(fixture_spec, priors, 256)[1].metric
        for size in (1, 2, 4, 16):
            assert scl_decode(fixture_spec, priors, size)[1].metric <= best + 1e-12


def test_crc_aided_noiseless_decoding():
    rng = np.random.default_rng(41)
    spec = random_code_spec(32, 16, rng)
    scheme = crc_scheme(4)
    for _ in range(10):
        message = crc_append(rng.integers(0, 2, 12), scheme)
        decoded, report = scl_decode(spec, ChannelPriors.noiseless(encode(spec, message)), 4, scheme)
        np.testing.assert_array_equal(decoded, message)
        assert not report.crc_fallback
        assert report.crc_passed[report.selected]


def test_select_path_prefers_passing_paths(fixture_spec):
    scheme = crc_scheme(4)
    good = crc_append([1, 0, 1, 1], scheme)
    other = crc_append([0, 1, 1, 0], scheme)
    bad = good.copy()
    bad[-1] ^= 1
    u_hat = np.stack([scatter_message(fixture_spec, bits) for bits in (bad, other, good)])
    metrics = np.array([-1.0, -5.0, -3.0])

    selected, passed, fallback = select_path(fixture_spec, u_hat, metrics, scheme)
    assert selected == 2 and not fallback
    np.testing.assert_array_equal(passed, [False, True, True])

    assert select_path(fixture_spec, u_hat, metrics, None) == (0, None, False)

    failing = np.stack([scatter_message(fixture_spec, bad)] * 2)
    selected, passed, fallback = select_path(fixture_spec, failing, np.array([-4.0, -2.0]), scheme)
    assert selected == 1 and fallback and not passed.any()


def test_crc_bits_occupy_the_last_information_positions(fixture_spec):
    scheme = crc_scheme(4)
    message = crc_append([0, 1, 1, 1], scheme)
    u = scatter_message(fixture_spec, message)
    np.testing.assert_array_equal(u[-4:], crc_remainder([0, 1, 1, 1], scheme))


def test_argument_checks(fixture_spec):
    priors = ChannelPriors.noiseless(np.zeros(16, dtype=np.int8))
    with pytest.raises(ValueError):
        scl_decode(fixture_spec, priors, 0)
    with pytest.raises(ValueError):
        scl_decode(fixture_spec, priors, 4, crc_scheme(12))
