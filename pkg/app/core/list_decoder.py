# app/core/list_decoder.py
"""
Successive-cancellation list (SCL) decoding with optional CRC-aided selection.

The list decoder runs the compact SC traversal with a path axis. Path metrics
are natural-log probabilities: every last-layer decision adds the log of the
decided value's probability given the path's earlier decisions, frozen bits
included, so a finished path's metric is the log-probability of its whole
message vector. At each information decision every path forks on all allowed
values and the best `list_size` candidates survive.

Candidates are ranked by metric; metrics within a relative TIE_TOLERANCE of
each other count as tied and keep (path index, value) order. With
`list_size=1` this repeats the SC decisions exactly.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.core.construction import CodeSpec
from app.core.crc import CrcScheme, crc_check
from app.core.sc_decoder import TIE_TOLERANCE, ChannelPriors, CompactDecoder, allowed_pairs, bit_marginals

logger = logging.getLogger(__name__)


def _log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(values)


def _ratio(values: np.ndarray, total: np.ndarray) -> np.ndarray:
    return np.divide(values, total, out=np.zeros_like(values), where=total > 0)


def rank_with_ties(totals: np.ndarray) -> np.ndarray:
    """
    Indices of `totals` from best to worst, where values within TIE_TOLERANCE
    (relative, in the probability domain) of a group's best value share its rank
    and keep index order among themselves.
    """
    order = np.lexsort((np.arange(totals.size), -totals))
    slack = np.log1p(TIE_TOLERANCE)
    groups = np.empty(totals.size, dtype=np.intp)
    group, head = 0, None
    for position, index in enumerate(order):
        value = totals[index]
        if head is not None and value < head - slack:
            group, head = group + 1, value
        elif head is None:
            head = value
        groups[position] = group
    return order[np.lexsort((order, groups))]


@dataclass
class ListDecodeReport:
    """
    Outcome of one list decode.

    Attributes:
        metrics: Final metric of every surviving path.
        crc_passed: Per-path CRC result, or None when decoding without CRC.
        selected: Index of the returned path.
        crc_fallback: True when a CRC was given and no path passed it.
        u_hat: Message vector of the returned path.
        codeword: Codeword estimate of the returned path.
    """
    metrics: np.ndarray
    crc_passed: Optional[np.ndarray]
    selected: int
    crc_fallback: bool
    u_hat: np.ndarray
    codeword: np.ndarray

    @property
    def metric(self) -> float:
        return float(self.metrics[self.selected])


class ScListDecoder(CompactDecoder):
    """Compact SC traversal that forks paths at information decisions."""

    def __init__(self, spec: CodeSpec, priors: ChannelPriors, list_size: int, normalize: bool = True):
        if list_size < 1:
            raise ValueError(f"list size must be at least 1, got {list_size}")
        super().__init__(spec, priors, normalize=normalize)
        self.list_size = list_size
        self.metrics = np.zeros(1)

    def _reindex(self, parents: np.ndarray):
        for nc in self.sizes:
            self.P[nc] = self.P[nc][parents]
            self.B[nc] = self.B[nc][parents]
            self.H[nc] = self.H[nc][parents]
        self.u_hat = self.u_hat[parents]

    def _fork(self, increments: np.ndarray) -> np.ndarray:
        """
        Extends every path by every candidate and keeps the best ones.

        Args:
            increments: (paths, candidates) log-probabilities of the candidates.

        Returns:
            The chosen candidate index of every surviving path.
        """
        candidates = increments.shape[1]
        totals = (self.metrics[:, None] + increments).ravel()
        order = rank_with_ties(totals)
        keep = max(min(self.list_size, int(np.isfinite(totals).sum())), 1)
        chosen = order[:keep]
        self._reindex(chosen // candidates)
        self.metrics = totals[chosen]
        return chosen % candidates

    def _decide_bit(self, i: int, probs: np.ndarray) -> np.ndarray:
        p0, p1 = bit_marginals(probs)
        raw = np.stack((p0, p1), axis=1)
        total = (p0 + p1)[:, None]
        increments = _log(_ratio(raw, total))
        frozen = self.frozen_value(i)
        if frozen is not None:
            self.metrics = self.metrics + increments[:, frozen]
            return np.full(self.paths, frozen, dtype=np.int8)
        return self._fork(increments).astype(np.int8)

    def _decide_pair(self, probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        candidates = allowed_pairs(self.frozen_value(self.n - 1), self.frozen_value(self.n))
        raw = np.stack([probs[:, a, b] for a, b in candidates], axis=1)
        total = ((probs[:, 0, 0] + probs[:, 0, 1]) + (probs[:, 1, 0] + probs[:, 1, 1]))[:, None]
        increments = _log(_ratio(raw, total))
        if len(candidates) == 1:
            self.metrics = self.metrics + increments[:, 0]
            chosen = np.zeros(self.paths, dtype=np.intp)
        else:
            chosen = self._fork(increments)
        pairs = np.asarray(candidates, dtype=np.int8)[chosen]
        return pairs[:, 0], pairs[:, 1]


class _PathScorer(CompactDecoder):
    """Follows one given message vector and sums the list decoder's metric increments."""

    def __init__(self, spec: CodeSpec, priors: ChannelPriors, u, normalize: bool = True):
        super().__init__(spec, priors, normalize=normalize)
        self.forced = np.asarray(u, dtype=np.int8).reshape(-1)
        if self.forced.size != spec.n:
            raise ValueError(f"message vector must hold {spec.n} bits, got {self.forced.size}")
        self.metric = 0.0

    def _decide_bit(self, i: int, probs: np.ndarray) -> np.ndarray:
        p0, p1 = bit_marginals(probs)
        value = int(self.forced[i - 1])
        self.metric += float(_log(_ratio((p0, p1)[value], p0 + p1))[0])
        return np.full(1, value, dtype=np.int8)

    def _decide_pair(self, probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        a, b = int(self.forced[self.n - 2]), int(self.forced[self.n - 1])
        total = (probs[:, 0, 0] + probs[:, 0, 1]) + (probs[:, 1, 0] + probs[:, 1, 1])
        self.metric += float(_log(_ratio(probs[:, a, b], total))[0])
        return np.full(1, a, dtype=np.int8), np.full(1, b, dtype=np.int8)


def path_log_probability(spec: CodeSpec, priors: ChannelPriors, u) -> float:
    """Metric the list decoder assigns to the full message vector `u`."""
    scorer = _PathScorer(spec, priors, u)
    scorer.decode()
    return scorer.metric


def select_path(spec: CodeSpec, u_hat: np.ndarray, metrics: np.ndarray,
                crc: Optional[CrcScheme]) -> Tuple[int, Optional[np.ndarray], bool]:
    """Best-metric path, restricted to CRC-passing paths when any pass."""
    best = int(np.argmax(metrics))
    if crc is None:
        return best, None, False
    info = spec.info_mask()
    passed = np.array([crc_check(path[info], crc) for path in u_hat], dtype=bool)
    if not passed.any():
        return best, passed, True
    passing = np.flatnonzero(passed)
    return int(passing[np.argmax(metrics[passing])]), passed, False


def scl_decode(spec: CodeSpec, priors: ChannelPriors, list_size: int,
               crc: Optional[CrcScheme] = None) -> Tuple[np.ndarray, ListDecodeReport]:
    """
    List-decodes one received word.

    Args:
        spec: The code; with a CRC its k information bits end with the check bits.
        priors: Likelihood pairs of the n received positions.
        list_size: Number of surviving paths L, at least 1.
        crc: Optional CRC used to choose among the final paths.

    Returns:
        (message, report): the k decided information bits and the ListDecodeReport.
    """
    if crc is not None and crc.length > spec.k:
        raise ValueError(f"CRC-{crc.length} does not fit in {spec.k} information bits")
    decoder = ScListDecoder(spec, priors, list_size)
    u_hat = decoder.decode()
    selected, passed, fallback = select_path(spec, u_hat, decoder.metrics, crc)
    if fallback:
        logger.debug("no path passed CRC-%d, returning the best metric", crc.length)
    report = ListDecodeReport(
        metrics=decoder.metrics.copy(),
        crc_passed=passed,
        selected=selected,
        crc_fallback=fallback,
        u_hat=u_hat[selected].copy(),
        codeword=decoder.codewords()[selected].copy(),
    )
    return u_hat[selected][spec.info_mask()].astype(np.int8), report

