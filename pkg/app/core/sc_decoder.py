# app/core/sc_decoder.py
"""
Successive-cancellation decoding of ABS+ polar codes over adjacent-bits channels.

Two decoders share the dispatch, the probability kernels and the decision rules:

- `ScDecoder` keeps one probability row per synthesized channel, P_{n_c}[i, beta],
  and one decision row per intermediate bit, B_{n_c}[i, beta]. Rows are 1-based
  (row 0 is unused) so the handlers read like the recursion they implement.
- `CompactDecoder` drops the row index and keeps a helper row H_{n_c}, which
  brings the memory down to 6 entries per transmitted bit. All of its arrays
  carry a leading path axis, which is what the list decoder forks.

Layer n_c works on blocks of n / n_c positions; within a block, beta runs over
the offsets and every update is a numpy slice operation over all of them.

P rows are filled pre-order and decisions are reconstructed post-order;
`decode_channel(n_c, i)` is called exactly once per (n_c, i).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit

from app.core.adjacent_channels import TransformMode, kernel
from app.core.channel_model import BmsChannel
from app.core.construction import CodeSpec

logger = logging.getLogger(__name__)

# --- Constants ---
PAIR_CANDIDATES: Tuple[Tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))
XOR_TABLE = np.array([[0, 1], [1, 0]], dtype=np.intp)
# Relative gap below which two probabilities count as tied; ties go to the earlier value.
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ChannelPriors:
    """
    Per-position likelihood pairs (W(y_t | 0), W(y_t | 1)) for t = 1..n.

    Attributes:
        likelihoods: Array of shape (n, 2), nonnegative, with a positive sum per row.
    """
    likelihoods: np.ndarray

    def __post_init__(self):
        values = np.array(self.likelihoods, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != 2:
            raise ValueError(f"priors must have shape (n, 2), got {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("priors must be finite and nonnegative")
        if np.any(values.sum(axis=1) <= 0):
            raise ValueError("every position needs w0 + w1 > 0")
        values.setflags(write=False)
        object.__setattr__(self, "likelihoods", values)

    @property
    def length(self) -> int:
        return self.likelihoods.shape[0]

    @classmethod
    def noiseless(cls, codeword) -> "ChannelPriors":
        """(1, 0) where the codeword bit is 0, (0, 1) where it is 1."""
        bits = np.asarray(codeword, dtype=np.intp).reshape(-1)
        return cls(np.eye(2)[bits])

    @classmethod
    def from_channel_outputs(cls, channel: BmsChannel, outputs) -> "ChannelPriors":
        """Likelihoods of observed output symbols (indices into the channel's alphabet)."""
        outputs = np.asarray(outputs, dtype=np.intp).reshape(-1)
        return cls(channel.probs[:, outputs].T)

    @classmethod
    def from_awgn(cls, received, noise_variance: float) -> "ChannelPriors":
        """BPSK (0 -> +1, 1 -> -1) observations; each pair is normalized to sum to 1."""
        llr = 2.0 * np.asarray(received, dtype=np.float64).reshape(-1) / noise_variance
        return cls(np.column_stack((expit(llr), expit(-llr))))


@dataclass
class DecodeTrace:
    """
    Instrumentation filled in by a decoder run.

    Attributes:
        visits: (n_c, i, handler) for every decode_channel call, in call order.
        kernel_evals: Number of probability entries computed by kernel fills.
        reuses: (n_c, i) of original handlers that reused an earlier decision
            instead of decoding their first child.
        layer_estimates: n_c -> decided intermediate vector x^(n_c), length n.
        live_entries: Probability, decision and helper entries allocated.
    """
    visits: List[Tuple[int, int, str]] = field(default_factory=list)
    kernel_evals: int = 0
    reuses: List[Tuple[int, int]] = field(default_factory=list)
    layer_estimates: Dict[int, np.ndarray] = field(default_factory=dict)
    live_entries: int = 0

    def handler_of(self, nc: int, i: int) -> Optional[str]:
        for visit in self.visits:
            if visit[:2] == (nc, i):
                return visit[2]
        return None


def seed_probabilities(likelihoods: np.ndarray) -> np.ndarray:
    """P_2[1, beta][a, b] = W(y_beta | a + b) * W(y_{beta + n/2} | b), shape (n/2, 2, 2)."""
    half = likelihoods.shape[0] // 2
    return likelihoods[:half][:, XOR_TABLE] * likelihoods[half:][:, None, :]


def normalize_slices(probs: np.ndarray) -> np.ndarray:
    """Scales every trailing 2 x 2 slice to sum to 1; all-zero slices stay zero."""
    total = (probs[..., 0, 0] + probs[..., 0, 1]) + (probs[..., 1, 0] + probs[..., 1, 1])
    total = total[..., None, None]
    return np.divide(probs, total, out=np.zeros_like(probs), where=total > 0)


def bit_marginals(probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sum over b of P[a, b] for a = 0 and a = 1."""
    return probs[..., 0, 0] + probs[..., 0, 1], probs[..., 1, 0] + probs[..., 1, 1]


def exceeds(value: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """value > reference beyond the relative TIE_TOLERANCE, so rescaling cannot flip a tie."""
    return value > reference * (1.0 + TIE_TOLERANCE)


def first_best(values: np.ndarray) -> np.ndarray:
    """Per row, the first column within TIE_TOLERANCE of the row maximum."""
    best = values.max(axis=-1, keepdims=True)
    return np.argmax(~exceeds(best, values), axis=-1)


def allowed_pairs(first_frozen: Optional[int], second_frozen: Optional[int]) -> List[Tuple[int, int]]:
    """Values of (U_{n-1}, U_n) compatible with their frozen values, in lexicographic order."""
    return [(a, b) for a, b in PAIR_CANDIDATES
            if first_frozen in (None, a) and second_frozen in (None, b)]


def layer_sizes_from_two(n: int) -> List[int]:
    sizes, size = [], 2
    while size <= n:
        sizes.append(size)
        size *= 2
    return sizes


class _DecoderBase:
    """Dispatch, frozen-bit bookkeeping and the SC decision rules."""

    def __init__(self, spec: CodeSpec, priors: ChannelPriors, normalize: bool = True,
                 frozen_lookahead: bool = False, trace: Optional[DecodeTrace] = None):
        if priors.length != spec.n:
            raise ValueError(f"priors cover {priors.length} positions, code length is {spec.n}")
        self.spec = spec
        self.n = spec.n
        self.priors = priors
        self.normalize = normalize
        self.frozen_lookahead = frozen_lookahead
        self.trace = trace
        self.sizes = layer_sizes_from_two(spec.n)
        self._info = spec.info_mask()
        self._frozen = spec.frozen_vector()
        self._swap = {size: spec.swap_set(size) for size in self.sizes}
        self._arikan = {size: spec.arikan_set(size) for size in self.sizes}

    def frozen_value(self, position: int) -> Optional[int]:
        """Frozen value of U_position (1-based), or None for an information bit."""
        if self._info[position - 1]:
            return None
        return int(self._frozen[position - 1])

    def handler_kind(self, nc: int, i: int) -> str:
        if nc == self.n:
            return "boundary"
        if 2 * i in self._swap[2 * nc]:
            return "swapped"
        if 2 * i in self._arikan[2 * nc]:
            return "added"
        return "original"

    def _prepare(self, values: np.ndarray) -> np.ndarray:
        return normalize_slices(values) if self.normalize else values

    def _visit(self, nc: int, i: int, kind: str):
        if self.trace is not None:
            self.trace.visits.append((nc, i, kind))

    def _count_fill(self, entries: int):
        if self.trace is not None:
            self.trace.kernel_evals += entries

    # --- Decisions at the last layer, vectorized over paths ---

    def _decide_bit(self, i: int, probs: np.ndarray) -> np.ndarray:
        """U_i for i <= n - 2 from probs of shape (paths, 2, 2)."""
        paths = probs.shape[0]
        frozen = self.frozen_value(i)
        if frozen is not None:
            return np.full(paths, frozen, dtype=np.int8)
        if self.frozen_lookahead:
            following = self.frozen_value(i + 1)
            if following is not None:
                return exceeds(probs[:, 1, following], probs[:, 0, following]).astype(np.int8)
        p0, p1 = bit_marginals(probs)
        return exceeds(p1, p0).astype(np.int8)

    def _decide_pair(self, probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(U_{n-1}, U_n) jointly: the first most likely pair allowed by the frozen values."""
        candidates = allowed_pairs(self.frozen_value(self.n - 1), self.frozen_value(self.n))
        values = np.stack([probs[:, a, b] for a, b in candidates], axis=1)
        chosen = np.asarray(candidates, dtype=np.int8)[first_best(values)]
        return chosen[:, 0], chosen[:, 1]


class ScDecoder(_DecoderBase):
    """
    SC decoder storing every synthesized channel's probabilities.

    Usage:
        decoder = ScDecoder(spec, priors)
        u_hat = decoder.decode()
        decoder.codeword  # estimate of the transmitted codeword
    """

    def __init__(self, spec: CodeSpec, priors: ChannelPriors, normalize: bool = True,
                 frozen_lookahead: bool = False, trace: Optional[DecodeTrace] = None):
        super().__init__(spec, priors, normalize, frozen_lookahead, trace)
        n = self.n
        self.P = {nc: np.zeros((nc, n // nc, 2, 2)) for nc in self.sizes}
        self.B = {nc: np.zeros((nc + 1, n // nc), dtype=np.int8) for nc in self.sizes}
        self.u_hat = np.zeros(n, dtype=np.int8)
        self.codeword: Optional[np.ndarray] = None
        if trace is not None:
            trace.live_entries = sum(4 * (n - n // nc) + n for nc in self.sizes)
            trace.layer_estimates = {nc: np.zeros(n, dtype=np.int8) for nc in self.sizes}

    def decode(self) -> np.ndarray:
        """Runs the decoder and returns the decided message vector u (length n)."""
        self.P[2][1] = self._prepare(seed_probabilities(self.priors.likelihoods))
        self.decode_channel(2, 1)
        first, second = self.B[2][1], self.B[2][2]
        self.codeword = np.concatenate((first ^ second, second))
        return self.u_hat

    def decode_channel(self, nc: int, i: int):
        kind = self.handler_kind(nc, i)
        self._visit(nc, i, kind)
        if kind == "boundary":
            self._decode_boundary(i)
        elif kind == "swapped":
            self._decode_transformed(nc, i, "SDB")
        elif kind == "added":
            self._decode_transformed(nc, i, "ADB")
        else:
            self._decode_original(nc, i)
        self._record_layer(nc, i)

    def calculate_probability(self, nc: int, i: int, beta: int, mode: TransformMode, a: int, b: int) -> float:
        """
        One entry of P_{2n_c}: the `mode` kernel on P_{n_c}[i, beta] and P_{n_c}[i, beta'].

        Mid kernels read B_{2n_c}[2i-1, beta]; last kernels also read B_{2n_c}[2i, beta].
        """
        offset = self.n // (2 * nc)
        first = self.P[nc][i, beta - 1]
        second = self.P[nc][i, beta - 1 + offset]
        child = self.B[2 * nc]
        r1, r2 = child[2 * i - 1, beta - 1], child[2 * i, beta - 1]
        return float(kernel(first, second, mode, r1, r2)[a, b])

    def _fill(self, nc: int, i: int, mode: TransformMode):
        """Computes the whole child row P_{2n_c}[2i-1 | 2i | 2i+1] for `mode`."""
        half = self.n // (2 * nc)
        parent = self.P[nc][i]
        child = self.B[2 * nc]
        row = {"first": 2 * i - 1, "mid": 2 * i, "last": 2 * i + 1}[mode.stage]
        values = kernel(parent[:half], parent[half:], mode, child[2 * i - 1], child[2 * i])
        self.P[2 * nc][row] = self._prepare(values)
        self._count_fill(4 * half)

    def _decode_boundary(self, i: int):
        probs = self.P[self.n][i, 0][None]
        if i <= self.n - 2:
            bit = self._decide_bit(i, probs)[0]
            self.B[self.n][i, 0] = bit
            self.u_hat[i - 1] = bit
            return
        first, second = self._decide_pair(probs)
        self.B[self.n][i, 0], self.B[self.n][i + 1, 0] = first[0], second[0]
        self.u_hat[i - 1], self.u_hat[i] = first[0], second[0]

    def _decode_transformed(self, nc: int, i: int, family: str):
        """Swapped (SDB) or added (ADB) channel: three children, always."""
        for offset, stage in enumerate(("first", "mid", "last")):
            self._fill(nc, i, TransformMode.of(family, stage))
            self.decode_channel(2 * nc, 2 * i - 1 + offset)

        half = self.n // (2 * nc)
        child, parent = self.B[2 * nc], self.B[nc]
        x1, x2, x3 = child[2 * i - 1], child[2 * i], child[2 * i + 1]
        if family == "SDB":
            parent[i, :half], parent[i, half:] = x1 ^ x3, x3
        else:
            parent[i, :half], parent[i, half:] = x1 ^ x2 ^ x3, x2 ^ x3
        if i == nc - 1:
            last = child[2 * nc]
            if family == "SDB":
                parent[nc, :half], parent[nc, half:] = x2 ^ last, last
            else:
                parent[nc, :half], parent[nc, half:] = x3 ^ last, last

    def _decode_original(self, nc: int, i: int):
        previous = 2 * (i - 1)
        if previous in self._swap[2 * nc]:
            # The swap routed X_{2i-2} into the butterfly of this pair.
            self.B[2 * nc][2 * i - 1] = self.B[2 * nc][2 * i - 2]
            self._note_reuse(nc, i)
        elif previous in self._arikan[2 * nc]:
            self._note_reuse(nc, i)
        else:
            self._fill(nc, i, TransformMode.DB_FIRST)
            self.decode_channel(2 * nc, 2 * i - 1)

        self._fill(nc, i, TransformMode.DB_MID)
        self.decode_channel(2 * nc, 2 * i)
        if i == nc - 1:
            self._fill(nc, i, TransformMode.DB_LAST)
            self.decode_channel(2 * nc, 2 * i + 1)

        half = self.n // (2 * nc)
        child, parent = self.B[2 * nc], self.B[nc]
        parent[i, :half], parent[i, half:] = child[2 * i - 1] ^ child[2 * i], child[2 * i]
        if i == nc - 1:
            parent[nc, :half], parent[nc, half:] = child[2 * nc - 1] ^ child[2 * nc], child[2 * nc]

    def _note_reuse(self, nc: int, i: int):
        if self.trace is not None:
            self.trace.reuses.append((nc, i))

    def _record_layer(self, nc: int, i: int):
        if self.trace is None:
            return
        width = self.n // nc
        estimate = self.trace.layer_estimates[nc]
        estimate[(i - 1) * width:i * width] = self.B[nc][i]
        if i == nc - 1:
            estimate[(nc - 1) * width:] = self.B[nc][nc]


class CompactDecoder(_DecoderBase):
    """
    SC decoder with one probability, decision and helper row per layer.

    B_{n_c} holds the decisions of the channel decoded last at layer n_c and
    H_{n_c} keeps the rows needed after the next one starts: the final row of
    the layer, and the rows later reused by an original handler that follows a
    swap or Arikan position. Every array has a leading path axis; decoding a
    single path is the SC decoder, `ScListDecoder` forks it.

    Child decode calls may replace the arrays (path pruning), so handlers look
    them up again after every call.
    """

    def __init__(self, spec: CodeSpec, priors: ChannelPriors, normalize: bool = True,
                 frozen_lookahead: bool = False, trace: Optional[DecodeTrace] = None):
        super().__init__(spec, priors, normalize, frozen_lookahead, trace)
        n = self.n
        self.P = {nc: np.zeros((1, n // nc, 2, 2)) for nc in self.sizes}
        self.B = {nc: np.zeros((1, n // nc), dtype=np.int8) for nc in self.sizes}
        self.H = {nc: np.zeros((1, n // nc), dtype=np.int8) for nc in self.sizes}
        self.u_hat = np.zeros((1, n), dtype=np.int8)
        if trace is not None:
            trace.live_entries = sum(self.P[nc].size + self.B[nc].size + self.H[nc].size for nc in self.sizes)

    @property
    def paths(self) -> int:
        return self.u_hat.shape[0]

    def decode(self) -> np.ndarray:
        """Runs the decoder; returns the decided message vectors, shape (paths, n)."""
        self.P[2][:] = self._prepare(seed_probabilities(self.priors.likelihoods))[None]
        self.decode_channel(2, 1)
        return self.u_hat

    def codewords(self) -> np.ndarray:
        first, last = self.B[2], self.H[2]
        return np.concatenate((first ^ last, last), axis=1)

    def decode_channel(self, nc: int, i: int):
        kind = self.handler_kind(nc, i)
        self._visit(nc, i, kind)
        if kind == "boundary":
            self._decode_boundary(i)
        elif kind == "swapped":
            self._decode_swapped(nc, i)
        elif kind == "added":
            self._decode_added(nc, i)
        else:
            self._decode_original(nc, i)
        if i <= nc - 2 and (i in self._swap[nc] or i - 1 in self._arikan[nc]):
            self.H[nc][:] = self.B[nc]

    def _fill(self, nc: int, mode: TransformMode):
        """Computes P_{2n_c} from P_{n_c}; r1 and r2 come from the halves of B_{n_c}."""
        half = self.n // (2 * nc)
        parent = self.P[nc]
        decided = self.B[nc]
        values = kernel(parent[:, :half], parent[:, half:], mode, decided[:, :half], decided[:, half:])
        self.P[2 * nc] = self._prepare(values)
        self._count_fill(4 * half * self.paths)

    def _decode_boundary(self, i: int):
        probs = self.P[self.n][:, 0]
        if i <= self.n - 2:
            bits = self._decide_bit(i, probs)
            self.B[self.n][:, 0] = bits
            self.u_hat[:, i - 1] = bits
            return
        first, second = self._decide_pair(probs)
        self.B[self.n][:, 0], self.H[self.n][:, 0] = first, second
        self.u_hat[:, i - 1], self.u_hat[:, i] = first, second

    def _decode_three_children(self, nc: int, i: int, family: str):
        half = self.n // (2 * nc)
        self._fill(nc, TransformMode.of(family, "first"))
        self.decode_channel(2 * nc, 2 * i - 1)
        self.B[nc][:, :half] = self.B[2 * nc]
        self._fill(nc, TransformMode.of(family, "mid"))
        self.decode_channel(2 * nc, 2 * i)
        self.B[nc][:, half:] = self.B[2 * nc]
        self._fill(nc, TransformMode.of(family, "last"))
        self.decode_channel(2 * nc, 2 * i + 1)

    def _decode_swapped(self, nc: int, i: int):
        self._decode_three_children(nc, i, "SDB")
        half = self.n // (2 * nc)
        parent = self.B[nc]
        x1, x2 = parent[:, :half].copy(), parent[:, half:].copy()
        x3 = self.B[2 * nc]
        parent[:, :half], parent[:, half:] = x1 ^ x3, x3
        if i == nc - 1:
            last = self.H[2 * nc]
            self.H[nc][:, :half], self.H[nc][:, half:] = x2 ^ last, last

    def _decode_added(self, nc: int, i: int):
        self._decode_three_children(nc, i, "ADB")
        half = self.n // (2 * nc)
        parent = self.B[nc]
        x1, x2 = parent[:, :half].copy(), parent[:, half:].copy()
        x3 = self.B[2 * nc]
        parent[:, :half], parent[:, half:] = x1 ^ x2 ^ x3, x2 ^ x3
        if i == nc - 1:
            last = self.H[2 * nc]
            self.H[nc][:, :half], self.H[nc][:, half:] = x3 ^ last, last

    def _decode_original(self, nc: int, i: int):
        half = self.n // (2 * nc)
        previous = 2 * (i - 1)
        if previous in self._swap[2 * nc] or previous in self._arikan[2 * nc]:
            self.B[nc][:, :half] = self.H[2 * nc]
        else:
            self._fill(nc, TransformMode.DB_FIRST)
            self.decode_channel(2 * nc, 2 * i - 1)
            self.B[nc][:, :half] = self.B[2 * nc]

        self._fill(nc, TransformMode.DB_MID)
        self.decode_channel(2 * nc, 2 * i)
        self.B[nc][:, half:] = self.B[2 * nc]
        if i <= nc - 2:
            self.B[nc][:, :half] ^= self.B[nc][:, half:]
            return

        self._fill(nc, TransformMode.DB_LAST)
        self.decode_channel(2 * nc, 2 * i + 1)
        self.B[nc][:, :half] ^= self.B[nc][:, half:]
        x3, last = self.B[2 * nc], self.H[2 * nc]
        self.H[nc][:, :half], self.H[nc][:, half:] = x3 ^ last, last


def _message_of(spec: CodeSpec, u_hat: np.ndarray) -> np.ndarray:
    return np.asarray(u_hat)[..., spec.info_mask()].astype(np.int8)


def sc_decode(spec: CodeSpec, priors: ChannelPriors, normalize: bool = True,
              frozen_lookahead: bool = False, trace: Optional[DecodeTrace] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Decodes one received word with the full-state SC decoder.

    Args:
        spec: The code.
        priors: Likelihood pairs of the n received positions.
        normalize: Scale every probability slice to sum 1 (decisions are unchanged).
        frozen_lookahead: Decide U_i from P[a, u_{i+1}] when U_{i+1} is frozen.
        trace: Optional DecodeTrace to fill.

    Returns:
        (message, codeword): the k decided information bits and the codeword estimate.
    """
    decoder = ScDecoder(spec, priors, normalize, frozen_lookahead, trace)
    u_hat = decoder.decode()
    return _message_of(spec, u_hat), decoder.codeword.copy()


def sc_decode_space_efficient(spec: CodeSpec, priors: ChannelPriors, normalize: bool = True,
                              frozen_lookahead: bool = False,
                              trace: Optional[DecodeTrace] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Same contract as `sc_decode`, using O(n) memory."""
    decoder = CompactDecoder(spec, priors, normalize, frozen_lookahead, trace)
    u_hat = decoder.decode()
    return _message_of(spec, u_hat[0]), decoder.codewords()[0].copy()

