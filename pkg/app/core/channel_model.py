# app/core/channel_model.py
"""
Binary-input memoryless symmetric (BMS) channels.

A channel is stored as a 2 x Y matrix of transition probabilities W(y|x). The
constructors in this module build the three channels the rest of the package
works with (BSC, BEC and a discretized BI-AWGN channel) and `capacity` computes
their symmetric capacity in bits.

Output symbols are plain indices. Continuous channel outputs never appear
here: the simulation module turns AWGN observations into per-position
likelihood pairs for the decoders.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri, xlogy

logger = logging.getLogger(__name__)

# --- Constants ---
ROW_SUM_TOLERANCE = 1e-10
DEFAULT_BINS = 64


@dataclass(frozen=True)
class BmsChannel:
    """
    A binary-input channel W(y|x), rows indexed by the input bit.

    Attributes:
        probs: Array of shape (2, output_size).
        pairing: Optional involution on output indices with W(y|0) == W(pairing[y]|1).
    """
    probs: np.ndarray
    pairing: Optional[np.ndarray] = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] != 2 or probs.shape[1] < 1:
            raise ValueError(f"channel matrix must have shape (2, Y), got {probs.shape}")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("channel probabilities must lie in [0, 1]")
        row_sums = probs.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOLERANCE):
            raise ValueError(f"channel rows must sum to 1, got {row_sums.tolist()}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

        if self.pairing is not None:
            pairing = np.array(self.pairing, dtype=np.int64)
            if pairing.shape != (probs.shape[1],):
                raise ValueError("pairing must have one entry per output symbol")
            if not np.array_equal(pairing[pairing], np.arange(pairing.size)):
                raise ValueError("pairing must be an involution")
            if not np.array_equal(probs[0], probs[1, pairing]):
                raise ValueError("pairing does not witness W(y|0) = W(pi(y)|1)")
            pairing.setflags(write=False)
            object.__setattr__(self, "pairing", pairing)

    @property
    def output_size(self) -> int:
        return self.probs.shape[1]


def _check_probability(value: float, name: str, upper: float):
    if not (0.0 <= value <= upper):
        raise ValueError(f"{name} must lie in [0, {upper}], got {value}")


def make_bsc(crossover: float) -> BmsChannel:
    """Binary symmetric channel with the given crossover probability (at most 1/2)."""
    _check_probability(crossover, "crossover", 0.5)
    p = float(crossover)
    probs = np.array([[1.0 - p, p], [p, 1.0 - p]])
    return BmsChannel(probs, pairing=np.array([1, 0]))


def make_bec(erasure: float) -> BmsChannel:
    """Binary erasure channel with outputs (0, erasure, 1)."""
    _check_probability(erasure, "erasure", 1.0)
    e = float(erasure)
    probs = np.array([[1.0 - e, e, 0.0], [0.0, e, 1.0 - e]])
    return BmsChannel(probs, pairing=np.array([2, 1, 0]))


def awgn_noise_variance(ebn0_db: float, rate: float) -> float:
    """Noise variance of unit-energy BPSK at the given Eb/N0 (dB) and code rate."""
    return 1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))


def discretize_biawgn(ebn0_db: float, rate: float, bins: int = DEFAULT_BINS) -> BmsChannel:
    """
    Quantizes BPSK over AWGN into `bins` output intervals.

    The positive half-line is cut into bins/2 intervals of equal probability
    under the input-0 density N(+1, sigma^2); the negative half-line mirrors
    it. Bin b pairs with bin bins-1-b. Doubling the bin count refines the
    partition, so capacity never decreases along 4, 8, 16, ...

    Args:
        ebn0_db: Eb/N0 in dB.
        rate: Code rate used to convert Eb/N0 into a noise variance.
        bins: Even number of output intervals, at least 4.

    Returns:
        The discretized channel.
    """
    if bins < 4 or bins % 2:
        raise ValueError(f"bins must be even and at least 4, got {bins}")
    if not (0.0 < rate < 1.0):
        raise ValueError(f"rate must lie in (0, 1), got {rate}")

    sigma = np.sqrt(awgn_noise_variance(ebn0_db, rate))
    half = bins // 2

    # Thresholds on the positive side, in units of the input-0 distribution.
    mass_below_zero = ndtr(-1.0 / sigma)
    levels = mass_below_zero + (1.0 - mass_below_zero) * np.arange(1, half) / half
    inner = 1.0 + sigma * ndtri(levels)
    edges = np.concatenate(([0.0], inner, [np.inf]))

    # Gaussian mass of [lo, hi) under N(+1, sigma^2) and N(-1, sigma^2).
    lo, hi = edges[:-1], edges[1:]
    pos_given_0 = ndtr((hi - 1.0) / sigma) - ndtr((lo - 1.0) / sigma)
    pos_given_1 = ndtr((hi + 1.0) / sigma) - ndtr((lo + 1.0) / sigma)

    # Bins ordered from -inf to +inf; the negative side mirrors the positive one.
    row0 = np.concatenate((pos_given_1[::-1], pos_given_0))
    row0 = np.clip(row0, 0.0, None)
    row0 = row0 / row0.sum()
    probs = np.vstack((row0, row0[::-1]))

    logger.debug("discretized BI-AWGN: ebn0=%.3f dB, rate=%.3f, sigma=%.4f, bins=%d",
                 ebn0_db, rate, sigma, bins)
    return BmsChannel(probs, pairing=np.arange(bins)[::-1].copy())


def capacity(channel: BmsChannel) -> float:
    """Symmetric capacity I(W) in bits, with 0 log 0 = 0."""
    probs = channel.probs
    mix = 0.5 * (probs[0] + probs[1])
    ratio = np.divide(probs, mix, out=np.ones_like(probs), where=mix > 0)
    value = 0.5 * np.sum(xlogy(probs, ratio)) / np.log(2.0)
    return float(np.clip(value, 0.0, 1.0))
