# scripts/test_channel_model.py

import sys
import os

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

# --- Boilerplate to make sibling packages accessible ---
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)
# ---------------------------------------------------

from app.core.channel_model import (
    BmsChannel,
    awgn_noise_variance,
    capacity,
    discretize_biawgn,
    make_bec,
    make_bsc,
)


def binary_entropy(p: float) -> float:
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def biawgn_capacity(sigma: float) -> float:
    """Capacity of BPSK over AWGN by numerical integration."""
    def integrand(y):
        density = norm.pdf(y, loc=1.0, scale=sigma)
        return density * np.log2(1.0 + np.exp(-2.0 * y / sigma ** 2))
    value, _ = quad(integrand, -1 - 12 * sigma, 1 + 12 * sigma, limit=200)
    return 1.0 - value


def test_bsc_capacity_values():
    assert capacity(make_bsc(0.0)) == pytest.approx(1.0, abs=1e-12)
    assert capacity(make_bsc(0.5)) == pytest.approx(0.0, abs=1e-12)
    assert capacity(make_bsc(0.1)) == pytest.approx(1.0 - binary_entropy(0.1), abs=1e-12)
    assert capacity(make_bsc(0.1)) == pytest.approx(0.531004, abs=1e-6)


def test_bec_capacity_and_layout():
    channel = make_bec(0.3)
    assert channel.output_size == 3
    assert capacity(channel) == pytest.approx(0.7, abs=1e-12)
    assert capacity(make_bec(0.0)) == pytest.approx(1.0, abs=1e-12)
    assert capacity(make_bec(1.0)) == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_array_equal(channel.pairing, [2, 1, 0])


@pytest.mark.parametrize("bad", [-0.1, 0.51, 1.2])
def test_bsc_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        make_bsc(bad)


@pytest.mark.parametrize("bad", [-0.01, 1.01])
def test_bec_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        make_bec(bad)


def test_channel_validation():
    with pytest.raises(ValueError):
        BmsChannel(np.array([[0.6, 0.6], [0.5, 0.5]]))
    with pytest.raises(ValueError):
        BmsChannel(np.array([[0.9, 0.1], [0.1, 0.9]]), pairing=np.array([0, 1]))
    with pytest.raises(ValueError):
        BmsChannel(np.array([[0.9, 0.1, 0.0], [0.0, 0.1, 0.9]]), pairing=np.array([1, 2, 0]))


def test_channel_is_read_only():
    channel = make_bsc(0.2)
    with pytest.raises(ValueError):
        channel.probs[0, 0] = 0.5


def test_noise_variance_formula():
    assert awgn_noise_variance(0.0, 0.5) == pytest.approx(1.0)
    assert awgn_noise_variance(10.0, 0.5) == pytest.approx(0.1)
    # a lower rate at the same Eb/N0 means more noise per channel use
    assert awgn_noise_variance(2.0, 120 / 256) > awgn_noise_variance(2.0, 128 / 256)


@pytest.mark.parametrize("bins", [4, 16, 64])
def test_biawgn_is_symmetric_and_normalized(bins):
    channel = discretize_biawgn(2.0, 0.5, bins)
    assert channel.output_size == bins
    np.testing.assert_allclose(channel.probs.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(channel.probs[0], channel.probs[1, channel.pairing])


def test_biawgn_capacity_increases_with_bins_and_stays_below_continuous():
    sigma = np.sqrt(awgn_noise_variance(2.0, 0.5))
    continuous = biawgn_capacity(sigma)
    values = [capacity(discretize_biawgn(2.0, 0.5, bins)) for bins in (4, 8, 16, 32, 64, 128)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] <= continuous + 1e-9
    assert continuous - values[-1] < 0.01


def test_biawgn_rejects_bad_arguments():
    with pytest.raises(ValueError):
        discretize_biawgn(2.0, 0.5, 5)
    with pytest.raises(ValueError):
        discretize_biawgn(2.0, 0.5, 2)
    with pytest.raises(ValueError):
        discretize_biawgn(2.0, 1.5)
