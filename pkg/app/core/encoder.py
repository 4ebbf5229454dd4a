# app/core/encoder.py
"""
In-place O(n log n) encoder for ABS+ polar codes, plus the generator-matrix
builder used to check it.

The working buffer is viewed, at each step, as n_c blocks of t = n / n_c
entries (block p holds positions p*t .. p*t + t - 1). A step first applies the
layer's pair transforms to neighbouring blocks, then the polar butterfly to
block pairs (2l-1, 2l). Every operation acts on whole blocks, so the offsets
h = 0..t-1 are processed together.
"""

import logging
from collections import Counter
from typing import Dict, Optional

import numpy as np

from app.core.construction import CodeSpec

logger = logging.getLogger(__name__)

# --- Constants ---
G2 = np.array([[1, 0], [1, 1]], dtype=np.int8)


def scatter_message(spec: CodeSpec, message_bits) -> np.ndarray:
    """Message vector u: information bits at `info_set`, frozen values elsewhere."""
    bits = np.asarray(message_bits, dtype=np.int8).reshape(-1)
    if bits.size != spec.k:
        raise ValueError(f"message must hold {spec.k} bits, got {bits.size}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("message bits must be 0 or 1")
    u = spec.frozen_vector()
    u[spec.info_mask()] = bits
    return u


def _apply_pair_transforms(blocks: np.ndarray, spec: CodeSpec, size: int, counter: Optional[Counter]):
    """Swap / Arikan transforms of layer `size` on the rows of a (size, t) view."""
    width = blocks.shape[1]
    for position in sorted(spec.swap_set(size)):
        # 1-based positions (2j, 2j+1) are rows 2j-1 and 2j.
        blocks[[position - 1, position]] = blocks[[position, position - 1]]
        if counter is not None:
            counter["pair_transforms"] += width
    for position in sorted(spec.arikan_set(size)):
        blocks[position - 1] ^= blocks[position]
        if counter is not None:
            counter["pair_transforms"] += width


def _encode_in_place(spec: CodeSpec, buffer: np.ndarray, counter: Optional[Counter],
                     layers: Optional[Dict[int, np.ndarray]]):
    n = spec.n
    size, width = n, 1
    while size >= 2:
        if layers is not None:
            layers[size] = buffer.copy()
        blocks = buffer.reshape(size, width)
        _apply_pair_transforms(blocks, spec, size, counter)
        blocks[0::2] ^= blocks[1::2]
        if counter is not None:
            counter["butterflies"] += n // 2
        size //= 2
        width *= 2
    if layers is not None:
        layers[1] = buffer.copy()


def encode_vector(spec: CodeSpec, u, counter: Optional[Counter] = None) -> np.ndarray:
    """Codeword x = u G_n for a full length-n message vector u."""
    buffer = np.array(u, dtype=np.int8).reshape(-1)
    if buffer.size != spec.n:
        raise ValueError(f"message vector must hold {spec.n} bits, got {buffer.size}")
    _encode_in_place(spec, buffer, counter, None)
    return buffer


def encode(spec: CodeSpec, message_bits, counter: Optional[Counter] = None) -> np.ndarray:
    """
    Encodes k information bits.

    Args:
        spec: The code.
        message_bits: k bits, placed at the information positions in increasing order.
        counter: Optional Counter receiving "pair_transforms" and "butterflies" counts.

    Returns:
        The length-n codeword as an int8 array.
    """
    return encode_vector(spec, scatter_message(spec, message_bits), counter)


def encode_layers(spec: CodeSpec, u) -> Dict[int, np.ndarray]:
    """
    The buffer at the start of every step: X^(n) = u, ..., X^(2), and X^(1) = codeword.

    Entry (i, beta) of X^(n_c), 1-based, sits at index (i - 1) * n / n_c + beta - 1.
    """
    buffer = np.array(u, dtype=np.int8).reshape(-1)
    if buffer.size != spec.n:
        raise ValueError(f"message vector must hold {spec.n} bits, got {buffer.size}")
    layers: Dict[int, np.ndarray] = {}
    _encode_in_place(spec, buffer, None, layers)
    return layers


def _pair_transform_matrix(spec: CodeSpec, size: int) -> np.ndarray:
    """Q of one layer, acting on row vectors: (u Q) applies the layer's pair transforms."""
    q = np.eye(size, dtype=np.int8)
    for position in spec.swap_set(size):
        q[:, [position - 1, position]] = q[:, [position, position - 1]]
    for position in spec.arikan_set(size):
        q[position, position - 1] = 1
    return q


def build_generator_matrix(spec: CodeSpec) -> np.ndarray:
    """G_n over GF(2) from G_2 and G_{n_c} = Q_{n_c} (G_{n_c / 2} kron G_2)."""
    generator = G2.copy()
    size = 2
    while size < spec.n:
        size *= 2
        product = np.kron(generator, G2) % 2
        generator = (_pair_transform_matrix(spec, size).astype(np.int64) @ product) % 2
        generator = generator.astype(np.int8)
    return generator


def gf2_rank(matrix: np.ndarray) -> int:
    """Rank over GF(2) by Gauss-Jordan elimination."""
    rows = np.array(matrix, dtype=np.int8) % 2
    rank = 0
    for col in range(rows.shape[1]):
        pivots = np.flatnonzero(rows[rank:, col])
        if pivots.size == 0:
            continue
        pivot = rank + pivots[0]
        rows[[rank, pivot]] = rows[[pivot, rank]]
        others = np.flatnonzero(rows[:, col])
        others = others[others != rank]
        rows[others] ^= rows[rank]
        rank += 1
        if rank == rows.shape[0]:
            break
    return rank

