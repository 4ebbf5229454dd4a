# app/core/adjacent_channels.py
"""
Adjacent-bits channels V(y | u1, u2) and their algebra.

An adjacent-bits channel carries two consecutive message bits through the
synthesized channel seen by a successive decoder. This module provides:

- `init_v2`, the two-bit channel of a single polar butterfly;
- `transform`, the nine double-bits kernels (DB / SDB / ADB, each with a
  first, mid and last stage) that produce the next layer's channels;
- entropy and polarization metrics (`entropy_pair`, `gamma_v`);
- `marginalize_to_bit_channels` to recover the two single-bit channels;
- `quantize`, a degrading output merge that keeps alphabets bounded;
- numeric checks of the input-relabeling equivalences.

The same wiring tables drive `transform` here and the probability kernels of
the SC decoder (`kernel`), so the channel objects and the decoder agree entry
by entry.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import entr, xlogy

from app.core.channel_model import BmsChannel

logger = logging.getLogger(__name__)

# --- Constants ---
ROW_SUM_TOLERANCE = 1e-10
EQUIVALENCE_TOLERANCE = 1e-10
LOSSLESS_DECIMALS = 12
PRE_MERGE_FACTOR = 4
MIN_QUANTIZER_OUTPUTS = 2
DEFAULT_MAX_OUTPUTS = 256
TEST_MAX_OUTPUTS = 64
LN2 = math.log(2.0)


@dataclass(frozen=True)
class AdjacentBitsChannel:
    """
    V(y | u1, u2) stored as a (4, Y) matrix; row 2*u1 + u2, column y.
    """
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64, order="C")
        if probs.ndim != 2 or probs.shape[0] != 4 or probs.shape[1] < 1:
            raise ValueError(f"adjacent-bits channel must have shape (4, Y), got {probs.shape}")
        if np.any(probs < 0):
            raise ValueError("adjacent-bits channel has negative entries")
        row_sums = probs.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOLERANCE):
            raise ValueError(f"adjacent-bits channel rows must sum to 1, got {row_sums.tolist()}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def output_size(self) -> int:
        return self.probs.shape[1]

    def by_inputs(self) -> np.ndarray:
        """View of the matrix indexed [u1, u2, y]."""
        return self.probs.reshape(2, 2, -1)


class TransformMode(Enum):
    """The nine synthesized-channel kernels, tagged (family, stage)."""
    DB_FIRST = ("DB", "first", "▽")
    DB_MID = ("DB", "mid", "◇")
    DB_LAST = ("DB", "last", "△")
    SDB_FIRST = ("SDB", "first", "▼")
    SDB_MID = ("SDB", "mid", "◆")
    SDB_LAST = ("SDB", "last", "▲")
    ADB_FIRST = ("ADB", "first", "▽̇")
    ADB_MID = ("ADB", "mid", "◇̇")
    ADB_LAST = ("ADB", "last", "△̇")

    @property
    def family(self) -> str:
        return self.value[0]

    @property
    def stage(self) -> str:
        return self.value[1]

    @property
    def symbol(self) -> str:
        return self.value[2]

    @classmethod
    def of(cls, family: str, stage: str) -> "TransformMode":
        return cls[f"{family}_{stage.upper()}"]


class PairTransformKind(Enum):
    """
    The six invertible linear maps on a bit pair. `apply` gives the new pair
    as a function of the channel-side pair (a, b).
    """
    IDENTITY = "I"
    SWAP = "S"
    ARIKAN = "A"
    D = "D"
    E = "E"
    K = "K"

    def apply(self, a: int, b: int) -> Tuple[int, int]:
        return _PAIR_MAPS[self](a, b)


_PAIR_MAPS: Dict[PairTransformKind, Callable[[int, int], Tuple[int, int]]] = {
    PairTransformKind.IDENTITY: lambda a, b: (a, b),
    PairTransformKind.SWAP: lambda a, b: (b, a),
    PairTransformKind.ARIKAN: lambda a, b: (a ^ b, b),
    PairTransformKind.D: lambda a, b: (a, a ^ b),
    PairTransformKind.E: lambda a, b: (b, a ^ b),
    PairTransformKind.K: lambda a, b: (a ^ b, a),
}


def _build_wiring(first: Callable, second: Callable) -> Tuple[np.ndarray, ...]:
    """Index tables (a1, b1, a2, b2) over (r1, r2, r3, r4) for one kernel family."""
    shape = (2, 2, 2, 2)
    tables = [np.zeros(shape, dtype=np.intp) for _ in range(4)]
    for r in itertools.product((0, 1), repeat=4):
        (tables[0][r], tables[1][r]) = first(*r)
        (tables[2][r], tables[3][r]) = second(*r)
    return tuple(tables)


# V(y1 | a1, b1) * V(y2 | a2, b2) for each family, in terms of (r1, r2, r3, r4).
WIRING: Dict[str, Tuple[np.ndarray, ...]] = {
    "DB": _build_wiring(lambda r1, r2, r3, r4: (r1 ^ r2, r3 ^ r4),
                        lambda r1, r2, r3, r4: (r2, r4)),
    "SDB": _build_wiring(lambda r1, r2, r3, r4: (r1 ^ r3, r2 ^ r4),
                         lambda r1, r2, r3, r4: (r3, r4)),
    "ADB": _build_wiring(lambda r1, r2, r3, r4: (r1 ^ r2 ^ r3, r3 ^ r4),
                         lambda r1, r2, r3, r4: (r2 ^ r3, r4)),
}


def wired_product(first: np.ndarray, second: np.ndarray, family: str) -> np.ndarray:
    """
    1/4 * first[a1, b1] * second[a2, b2] for every (r1, r2, r3, r4).

    `first` and `second` have shape (..., 2, 2); the result has shape
    (..., 2, 2, 2, 2) indexed by (r1, r2, r3, r4).
    """
    a1, b1, a2, b2 = WIRING[family]
    return 0.25 * first[..., a1, b1] * second[..., a2, b2]


def kernel(first: np.ndarray, second: np.ndarray, mode: TransformMode,
           r1: Optional[np.ndarray] = None, r2: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Evaluates one synthesized-channel kernel on stored probability slices.

    Args:
        first: Parent probabilities at positions beta, shape (..., 2, 2).
        second: Parent probabilities at positions beta', same shape.
        mode: Which of the nine kernels to evaluate.
        r1: Already decided first bit, shape (...); needed by mid and last stages.
        r2: Already decided second bit, shape (...); needed by last stages.

    Returns:
        Unnormalized child probabilities of shape (..., 2, 2), indexed by the
        two input bits of the synthesized channel.
    """
    prod = wired_product(first, second, mode.family)
    if mode.stage == "first":
        return (prod[..., 0, 0] + prod[..., 0, 1]) + (prod[..., 1, 0] + prod[..., 1, 1])

    pick1 = np.asarray(r1, dtype=np.intp)[..., None, None, None, None]
    rest = np.take_along_axis(prod, pick1, axis=-4)[..., 0, :, :, :]
    if mode.stage == "mid":
        return rest[..., 0] + rest[..., 1]

    pick2 = np.asarray(r2, dtype=np.intp)[..., None, None, None]
    return np.take_along_axis(rest, pick2, axis=-3)[..., 0, :, :]


def output_index(mode: TransformMode, y1: int, y2: int, base_size: int,
                 r1: int = 0, r2: int = 0) -> int:
    """Column of `transform(V, mode)` holding outputs (r1, r2, y1, y2) of V-sized alphabet."""
    pair = y1 * base_size + y2
    if mode.stage == "first":
        return pair
    if mode.stage == "mid":
        return r1 * base_size * base_size + pair
    return (2 * r1 + r2) * base_size * base_size + pair


def init_v2(channel: BmsChannel) -> AdjacentBitsChannel:
    """V((y1, y2) | u1, u2) = W(y1 | u1 + u2) * W(y2 | u2)."""
    w = channel.probs
    size = channel.output_size
    probs = np.empty((4, size * size))
    for u1, u2 in itertools.product((0, 1), repeat=2):
        probs[2 * u1 + u2] = np.outer(w[u1 ^ u2], w[u2]).ravel()
    return AdjacentBitsChannel(probs)


def transform(channel: AdjacentBitsChannel, mode: TransformMode) -> AdjacentBitsChannel:
    """
    Synthesizes the next-layer channel for one of the nine kernels.

    Outputs of the result are laid out as described by `output_index`:
    first stages see (y1, y2), mid stages (r1, y1, y2), last stages
    (r1, r2, y1, y2), where y1 and y2 are outputs of two copies of `channel`.
    """
    size = channel.output_size
    v = np.moveaxis(channel.by_inputs(), -1, 0)  # (Y, 2, 2)
    prod = wired_product(v[:, None], v[None, :], mode.family)  # (Y, Y, r1, r2, r3, r4)

    if mode.stage == "first":
        table = prod.sum(axis=(4, 5))  # (Y, Y, r1, r2)
        probs = np.moveaxis(table, (2, 3), (0, 1)).reshape(4, size * size)
    elif mode.stage == "mid":
        table = prod.sum(axis=5)  # (Y, Y, r1, r2, r3)
        probs = table.transpose(3, 4, 2, 0, 1).reshape(4, 2 * size * size)
    else:
        probs = prod.transpose(4, 5, 2, 3, 0, 1).reshape(4, 4 * size * size)
    return AdjacentBitsChannel(probs)


def relabel_inputs(channel: AdjacentBitsChannel, mapping: Callable[[int, int], Tuple[int, int]]) -> AdjacentBitsChannel:
    """Channel seen by the new pair mapping(a, b) when (a, b) drives `channel`."""
    probs = np.empty_like(channel.probs)
    for a, b in itertools.product((0, 1), repeat=2):
        u1, u2 = mapping(a, b)
        probs[2 * u1 + u2] = channel.probs[2 * a + b]
    return AdjacentBitsChannel(probs)


def apply_pair_transform(channel: AdjacentBitsChannel, kind: PairTransformKind) -> AdjacentBitsChannel:
    return relabel_inputs(channel, kind.apply)


def _joint_entropies(channel: AdjacentBitsChannel) -> Tuple[float, float, float]:
    """H(Y), H(U1, Y), H(U1, U2, Y) in nats for uniform inputs."""
    joint = 0.25 * channel.probs
    first_and_y = joint[0:2].sum(axis=0), joint[2:4].sum(axis=0)
    y_only = first_and_y[0] + first_and_y[1]
    h_y = entr(y_only).sum()
    h_first = entr(first_and_y[0]).sum() + entr(first_and_y[1]).sum()
    h_all = entr(joint).sum()
    return h_y, h_first, h_all


def entropy_pair(channel: AdjacentBitsChannel) -> Tuple[float, float]:
    """(H(U1 | Y), H(U2 | U1, Y)) in bits for uniform i.i.d. inputs."""
    h_y, h_first, h_all = _joint_entropies(channel)
    h1 = float(np.clip((h_first - h_y) / LN2, 0.0, 1.0))
    h2 = float(np.clip((h_all - h_first) / LN2, 0.0, 1.0))
    return h1, h2


def mutual_information(channel: AdjacentBitsChannel) -> float:
    """I(U1, U2; Y) in bits."""
    h_y, _, h_all = _joint_entropies(channel)
    return float(2.0 - (h_all - h_y) / LN2)


def gamma_from_entropies(h1: float, h2: float) -> float:
    return h1 * (1.0 - h1) + h2 * (1.0 - h2)


def gamma_v(channel: AdjacentBitsChannel) -> float:
    """Polarization score h1(1 - h1) + h2(1 - h2) of an adjacent-bits channel."""
    return gamma_from_entropies(*entropy_pair(channel))


def marginalize_to_bit_channels(channel: AdjacentBitsChannel) -> Tuple[BmsChannel, BmsChannel]:
    """
    Splits V into its two bit-channels.

    Returns:
        W_first(y | u1) = 1/2 sum_u2 V(y | u1, u2), and
        W_second((u1, y) | u2) = 1/2 V(y | u1, u2), output index u1 * Y + y.
    """
    v = channel.by_inputs()
    first = 0.5 * (v[:, 0] + v[:, 1])
    second = 0.5 * np.concatenate((v[0], v[1]), axis=1)  # row u2, columns (u1, y)
    return BmsChannel(first), BmsChannel(second)


# --- Quantization ---

def _sum_groups(columns: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels).reshape(-1)
    groups = int(labels.max()) + 1
    merged = np.empty((groups, columns.shape[1]))
    for u in range(columns.shape[1]):
        merged[:, u] = np.bincount(labels, weights=columns[:, u], minlength=groups)
    return merged


def _merge_identical(columns: np.ndarray) -> np.ndarray:
    """Drops zero-mass outputs and merges outputs with equal posteriors."""
    mass = columns.sum(axis=1)
    columns, mass = columns[mass > 0], mass[mass > 0]
    keys = np.round(columns / mass[:, None], LOSSLESS_DECIMALS)
    _, labels = np.unique(keys, axis=0, return_inverse=True)
    return _sum_groups(columns, labels)


def _grid_resolution(budget: int) -> int:
    """Largest r whose simplex grid (a + b + c <= r) has at most `budget` cells."""
    resolution = 1
    while math.comb(resolution + 4, 3) <= budget:
        resolution += 1
    return resolution


def _merge_cells(columns: np.ndarray, budget: int) -> np.ndarray:
    """Merges outputs whose posteriors fall in the same cell of a uniform simplex grid."""
    resolution = _grid_resolution(budget)
    posterior = columns / columns.sum(axis=1)[:, None]
    cells = np.minimum(np.floor(posterior[:, :3] * resolution), resolution).astype(np.int64)
    base = resolution + 1
    keys = (cells[:, 0] * base + cells[:, 1]) * base + cells[:, 2]
    _, labels = np.unique(keys, return_inverse=True)
    return _sum_groups(columns, labels)


def _merge_losses(k: int, joint: np.ndarray, self_terms: np.ndarray,
                  mass: np.ndarray, mass_terms: np.ndarray) -> np.ndarray:
    """Loss of I(U1, U2; Y) in bits when output k is merged with every output."""
    merged = joint[k] + joint
    inner = self_terms[k] + self_terms - xlogy(merged, merged).sum(axis=1)
    total = mass[k] + mass
    outer = mass_terms[k] + mass_terms - xlogy(total, total)
    return np.maximum(inner - outer, 0.0) / LN2


def _merge_greedy(columns: np.ndarray, target: int) -> np.ndarray:
    """Repeatedly merges the pair of outputs with the smallest information loss."""
    joint = 0.25 * columns
    count = joint.shape[0]
    mass = joint.sum(axis=1)
    self_terms = xlogy(joint, joint).sum(axis=1)
    mass_terms = xlogy(mass, mass)

    losses = np.vstack([_merge_losses(k, joint, self_terms, mass, mass_terms) for k in range(count)])
    np.fill_diagonal(losses, np.inf)
    partner = np.argmin(losses, axis=1)
    best = losses[np.arange(count), partner]
    alive = np.ones(count, dtype=bool)

    for _ in range(count - target):
        i = int(np.argmin(best))
        j = int(partner[i])

        joint[i] += joint[j]
        mass[i] = joint[i].sum()
        self_terms[i] = xlogy(joint[i], joint[i]).sum()
        mass_terms[i] = xlogy(mass[i], mass[i])
        alive[j] = False
        best[j] = np.inf
        losses[j, :] = np.inf
        losses[:, j] = np.inf

        row = _merge_losses(i, joint, self_terms, mass, mass_terms)
        row[~alive] = np.inf
        row[i] = np.inf
        losses[i, :] = row
        losses[:, i] = row

        for r in np.flatnonzero(alive & ((partner == i) | (partner == j))):
            partner[r] = np.argmin(losses[r])
            best[r] = losses[r, partner[r]]
        closer = alive & (row < best)
        partner[closer] = i
        best[closer] = row[closer]

    return 4.0 * joint[alive]


def quantize(channel: AdjacentBitsChannel, max_outputs: Optional[int]) -> AdjacentBitsChannel:
    """
    Degrading merge of the output alphabet.

    With `max_outputs=None` only zero-mass outputs are dropped and outputs with
    identical posteriors are merged, which leaves every entropy unchanged.
    Otherwise the result has at most `max_outputs` outputs: a grid pre-merge on
    the posterior simplex brings very large alphabets down to
    PRE_MERGE_FACTOR * max_outputs, then outputs are merged greedily, always
    the pair losing the least I(U1, U2; Y). Row sums are preserved and the
    mutual information never increases.

    Args:
        channel: Channel to reduce.
        max_outputs: Output budget, at least MIN_QUANTIZER_OUTPUTS, or None.

    Returns:
        The reduced channel; `channel` itself if it already fits the budget.
    """
    if max_outputs is not None:
        if max_outputs < MIN_QUANTIZER_OUTPUTS:
            raise ValueError(f"max_outputs must be at least {MIN_QUANTIZER_OUTPUTS}, got {max_outputs}")
        if channel.output_size <= max_outputs:
            return channel

    columns = channel.probs.T
    if max_outputs is None:
        return AdjacentBitsChannel(_merge_identical(columns).T)

    mass = columns.sum(axis=1)
    columns = columns[mass > 0]
    budget = PRE_MERGE_FACTOR * max_outputs
    if columns.shape[0] > budget:
        columns = _merge_cells(columns, budget)
    columns = _merge_identical(columns)
    if columns.shape[0] > max_outputs:
        columns = _merge_greedy(columns, max_outputs)
    return AdjacentBitsChannel(columns.T)


# --- Equivalence checks ---

@dataclass
class PairTransformReport:
    """Entropy pairs under each input relabeling and any violated equivalence."""
    entropies: Dict[PairTransformKind, Tuple[float, float]]
    bijection_classes: Dict[PairTransformKind, int] = field(default_factory=dict)
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _close(first: Tuple[float, float], second: Tuple[float, float]) -> bool:
    return all(abs(x - y) <= EQUIVALENCE_TOLERANCE for x, y in zip(first, second))


def verify_pair_transform_equivalences(channel: AdjacentBitsChannel) -> PairTransformReport:
    """
    Checks that D, E and K act like Identity, Swap and Arikan on (h1, h2),
    and that each of the 24 bijections of {0,1}^2 lands in one of those classes.
    """
    entropies = {kind: entropy_pair(apply_pair_transform(channel, kind)) for kind in PairTransformKind}
    report = PairTransformReport(entropies=entropies)

    groupings = [(PairTransformKind.D, PairTransformKind.IDENTITY),
                 (PairTransformKind.E, PairTransformKind.SWAP),
                 (PairTransformKind.K, PairTransformKind.ARIKAN)]
    for kind, reference in groupings:
        if not _close(entropies[kind], entropies[reference]):
            report.violations.append(
                f"{kind.value} gives {entropies[kind]} but {reference.value} gives {entropies[reference]}")

    representatives = (PairTransformKind.IDENTITY, PairTransformKind.SWAP, PairTransformKind.ARIKAN)
    report.bijection_classes = {kind: 0 for kind in representatives}
    for image in itertools.permutations(range(4)):
        mapped = entropy_pair(relabel_inputs(channel, lambda a, b: divmod(image[2 * a + b], 2)))
        match = next((kind for kind in representatives if _close(mapped, entropies[kind])), None)
        if match is None:
            report.violations.append(f"bijection {image} gives {mapped}, outside the three classes")
        else:
            report.bijection_classes[match] += 1
    return report


@dataclass
class OddPositionReport:
    """Entropies around one polar butterfly and its swapped / Arikan variants."""
    parent_entropy: float
    butterfly: Tuple[float, float]
    swapped: Tuple[float, float]
    added: Tuple[float, float]
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_odd_position_transforms(channel: AdjacentBitsChannel) -> OddPositionReport:
    """
    A pair transform right after a polar butterfly can only hurt.

    With V = transform(channel, DB_FIRST), the butterfly splits
    h = H(W_j) into h1(V) >= h >= h2(V); swapping or adding V's inputs
    yields h1 = h2 = h and a larger gamma.
    """
    parent_entropy = entropy_pair(channel)[0]
    butterfly = transform(channel, TransformMode.DB_FIRST)
    pair = entropy_pair(butterfly)
    swapped = entropy_pair(apply_pair_transform(butterfly, PairTransformKind.SWAP))
    added = entropy_pair(apply_pair_transform(butterfly, PairTransformKind.ARIKAN))
    report = OddPositionReport(parent_entropy, pair, swapped, added)

    tol = EQUIVALENCE_TOLERANCE
    if not (pair[0] + tol >= parent_entropy >= pair[1] - tol):
        report.violations.append(f"butterfly entropies {pair} do not straddle {parent_entropy}")
    for name, variant in (("swap", swapped), ("arikan", added)):
        if not _close(variant, (parent_entropy, parent_entropy)):
            report.violations.append(f"{name} variant gives {variant}, expected both {parent_entropy}")
        if gamma_from_entropies(*variant) < gamma_from_entropies(*pair) - tol:
            report.violations.append(f"{name} variant lowers gamma")
    return report
