# scripts/test_encoder.py

import sys
import os
from collections import Counter
from functools import reduce

import numpy as np
import pytest

# --- Boilerplate to make sibling packages accessible ---
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)
# ---------------------------------------------------

from app.core.construction import CodeSpec, LayerSets, layer_sizes
from app.core.encoder import (
    G2,
    build_generator_matrix,
    encode,
    encode_layers,
    encode_vector,
    gf2_rank,
    scatter_message,
)
from oracles import all_messages, random_code_spec

FIXTURE_PATH = os.path.join(project_root, 'codes', 'abs_plus_16_8.json')


@pytest.fixture(scope="module")
def fixture_spec():
    with open(FIXTURE_PATH, encoding='utf-8') as f:
        return CodeSpec.from_json(f.read())


def test_fixture_encoder_matches_generator_matrix(fixture_spec):
    generator = build_generator_matrix(fixture_spec)
    for message in all_messages(fixture_spec.k):
        u = scatter_message(fixture_spec, message)
        expected = (u.astype(np.int64) @ generator) % 2
        np.testing.assert_array_equal(encode(fixture_spec, message), expected)


@pytest.mark.parametrize("seed", range(10))
def test_unit_vectors_give_generator_rows(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.choice([4, 8, 16, 32, 64]))
    spec = random_code_spec(n, n // 2, rng)
    generator = build_generator_matrix(spec)
    for i in range(n):
        unit = np.zeros(n, dtype=np.int8)
        unit[i] = 1
        np.testing.assert_array_equal(encode_vector(spec, unit), generator[i])
    assert gf2_rank(generator) == n


def test_standard_code_is_kronecker_power():
    for n in (2, 4, 8, 16):
        layers = tuple(LayerSets(size=size) for size in layer_sizes(n))
        spec = CodeSpec(n=n, k=1, mode="standard", layers=layers, info_set=(n,))
        power = reduce(np.kron, [G2] * int(np.log2(n)))
        np.testing.assert_array_equal(build_generator_matrix(spec), power)


def test_length_two_butterfly():
    spec = CodeSpec(n=2, k=2, mode="standard", layers=(), info_set=(1, 2))
    for u1 in (0, 1):
        for u2 in (0, 1):
            np.testing.assert_array_equal(encode(spec, [u1, u2]), [u1 ^ u2, u2])


def test_frozen_values_are_placed(fixture_spec):
    spec = fixture_spec.model_copy(update={"frozen_values": (1, 0, 1, 0, 0, 0, 0, 1)})
    u = scatter_message(spec, np.ones(8, dtype=np.int8))
    np.testing.assert_array_equal(u, [1, 0, 1, 0, 0, 0, 0, 1] + [1] * 8)


def test_scatter_message_validation(fixture_spec):
    with pytest.raises(ValueError):
        scatter_message(fixture_spec, [0, 1, 0])
    with pytest.raises(ValueError):
        scatter_message(fixture_spec, [0, 1, 2, 0, 0, 0, 0, 0])
    with pytest.raises(ValueError):
        encode_vector(fixture_spec, np.zeros(8))


def test_gf2_rank():
    assert gf2_rank(np.eye(4, dtype=np.int8)) == 4
    assert gf2_rank(np.array([[1, 1], [1, 1]])) == 1
    assert gf2_rank(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])) == 2


def test_encode_layers_bracket_the_codeword(fixture_spec):
    rng = np.random.default_rng(3)
    u = scatter_message(fixture_spec, rng.integers(0, 2, 8))
    layers = encode_layers(fixture_spec, u)
    assert sorted(layers) == [1, 2, 4, 8, 16]
    np.testing.assert_array_equal(layers[16], u)
    np.testing.assert_array_equal(layers[1], encode_vector(fixture_spec, u))
    # the last step is a plain butterfly on the two halves
    first, second = layers[2][:8], layers[2][8:]
    np.testing.assert_array_equal(layers[1], np.concatenate((first ^ second, second)))


def test_operation_counts(fixture_spec):
    counter = Counter()
    encode(fixture_spec, np.zeros(8, dtype=np.int8), counter)
    # 16/2 butterflies per step over 4 steps; pair transforms act on n / n_c offsets each
    assert counter["butterflies"] == 8 * 4
    assert counter["pair_transforms"] == 1 * 4 + 1 * 2 + 3 * 1


def test_butterfly_count_scales_as_n_log_n():
    counts = {}
    for n in (256, 2048):
        spec = random_code_spec(n, n // 2, np.random.default_rng(n), density=1.0)
        counter = Counter()
        encode(spec, np.zeros(n // 2, dtype=np.int8), counter)
        counts[n] = counter["butterflies"] + counter["pair_transforms"]
    assert counts[2048] / counts[256] <= 12
