# scripts/oracles.py
"""
Brute-force reference computations shared by the tests.

Everything here enumerates explicitly (all messages, all channel outputs), so
it is only usable at small n, and it relies on nothing but the generator
matrix and numpy.
"""

import os
import sys
from typing import Optional, Tuple

import numpy as np
from scipy.special import entr

# --- Boilerplate to make sibling packages accessible ---
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)
# ---------------------------------------------------

from app.core.channel_model import BmsChannel
from app.core.construction import CodeSpec, LayerSets, layer_sizes
from app.core.sc_decoder import ChannelPriors

LN2 = np.log(2.0)


def all_messages(length: int) -> np.ndarray:
    """Every binary vector of `length` bits, first bit most significant, in counting order."""
    values = np.arange(2 ** length)
    shifts = np.arange(length - 1, -1, -1)
    return ((values[:, None] >> shifts) & 1).astype(np.int8)


def _entropy_bits(probs: np.ndarray) -> float:
    return float(entr(probs).sum() / LN2)


def joint_bit_entropies(generator: np.ndarray, channel: BmsChannel) -> np.ndarray:
    """
    H(U_i | U_1..U_{i-1}, Y_1..Y_n) for uniform U and x = u G, by enumerating
    the full joint distribution of (U, Y).
    """
    n = generator.shape[0]
    messages = all_messages(n)
    codewords = (messages.astype(np.int64) @ generator.astype(np.int64)) % 2
    outputs = channel.probs.shape[1]

    # likelihood[u, y] = prod_t W(y_t | x_t), y in counting order over the alphabet
    likelihood = np.ones((messages.shape[0], 1))
    for t in range(n):
        rows = channel.probs[codewords[:, t]]
        likelihood = (likelihood[:, :, None] * rows[:, None, :]).reshape(messages.shape[0], -1)
    joint = likelihood / messages.shape[0]
    assert joint.shape[1] == outputs ** n

    # prefix[i] = H(U_1..U_i, Y)
    prefix = []
    for i in range(n + 1):
        grouped = joint.reshape(2 ** i, 2 ** (n - i), -1).sum(axis=1)
        prefix.append(_entropy_bits(grouped))
    return np.diff(np.array(prefix))


def odd_position_generator(generator: np.ndarray, position: int, kind: str) -> np.ndarray:
    """
    Generator of the code that applies a pair transform to (u_p, u_{p+1}),
    p odd and 1-based, before `generator`.
    """
    if position % 2 != 1 or not 1 <= position < generator.shape[0]:
        raise ValueError(f"position must be odd and below {generator.shape[0]}, got {position}")
    q = np.eye(generator.shape[0], dtype=np.int64)
    if kind == "swap":
        q[:, [position - 1, position]] = q[:, [position, position - 1]]
    elif kind == "arikan":
        q[position, position - 1] = 1
    else:
        raise ValueError(f"unknown pair transform {kind!r}")
    return ((q @ generator.astype(np.int64)) % 2).astype(np.int8)


def codeword_log_likelihood(priors: ChannelPriors, codeword) -> float:
    """sum_t log w_t(x_t); -inf when some position rules the codeword out."""
    bits = np.asarray(codeword, dtype=np.intp).reshape(-1)
    values = priors.likelihoods[np.arange(bits.size), bits]
    with np.errstate(divide="ignore"):
        return float(np.log(values).sum())


def ml_decode(spec: CodeSpec, generator: np.ndarray, priors: ChannelPriors) -> Tuple[np.ndarray, float]:
    """Exhaustive maximum-likelihood message (k bits) and its codeword log-likelihood."""
    messages = all_messages(spec.k)
    u = np.tile(spec.frozen_vector(), (messages.shape[0], 1))
    u[:, spec.info_mask()] = messages
    codewords = (u.astype(np.int64) @ generator.astype(np.int64)) % 2
    weights = priors.likelihoods[np.arange(spec.n)[None, :], codewords]
    with np.errstate(divide="ignore"):
        scores = np.log(weights).sum(axis=1)
    best = int(np.argmax(scores))
    return messages[best], float(scores[best])


def random_layer_sets(size: int, rng: np.random.Generator, mode: str = "abs+",
                      density: float = 0.5) -> LayerSets:
    """Random valid swap / Arikan positions for one layer."""
    swap, arikan = [], []
    last = -4
    for position in range(2, size - 1, 2):
        if position - last < 4 or mode == "standard" or rng.random() >= density:
            continue
        if mode == "abs" or rng.random() < 0.5:
            swap.append(position)
        else:
            arikan.append(position)
        last = position
    return LayerSets(size=size, swap=tuple(swap), arikan=tuple(arikan))


def random_code_spec(n: int, k: int, rng: np.random.Generator, mode: str = "abs+",
                     random_frozen: bool = False, density: float = 0.5) -> CodeSpec:
    """A random valid CodeSpec: random layer sets, information set and (optionally) frozen values."""
    layers = tuple(random_layer_sets(size, rng, mode, density) for size in layer_sizes(n))
    info_set = tuple(sorted(int(p) + 1 for p in rng.choice(n, size=k, replace=False)))
    frozen: Optional[Tuple[int, ...]] = None
    if random_frozen:
        frozen = tuple(int(b) for b in rng.integers(0, 2, n - k))
    return CodeSpec(n=n, k=k, mode=mode, layers=layers, info_set=info_set,
                    frozen_values=frozen if frozen is not None else (0,) * (n - k))


def noisy_priors(codeword, crossover: float, rng: np.random.Generator) -> ChannelPriors:
    """BSC(crossover) observation of `codeword`, as likelihood pairs."""
    bits = np.asarray(codeword, dtype=np.intp).reshape(-1)
    flips = rng.random(bits.size) < crossover
    received = bits ^ flips
    table = np.array([[1 - crossover, crossover], [crossover, 1 - crossover]])
    return ChannelPriors(table[received])
