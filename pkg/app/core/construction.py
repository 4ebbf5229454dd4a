# app/core/construction.py
"""
Code construction: evolve adjacent-bits channels layer by layer, choose where
to insert swap / Arikan pair transforms, and pick the information set.

Positions are 1-based throughout this module and in CodeSpec documents, the
same numbering used for bit indices U_1..U_n. Arrays indexed by position use
index p - 1.

The construction for a target length n runs one layer per size
n_c = 4, 8, ..., n:

1. score every even position 2j of the new layer from the previous layer's
   channel V_j (`score_position`);
2. keep the best spaced subset of positive scores (`select_positions`);
3. split it into swap and Arikan positions by which transform scored best;
4. synthesize the new layer's channels (`evolve_layer`) and quantize them.

The bit-channels of the last layer are then ranked by capacity.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Literal, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from tqdm import tqdm

from app.core.adjacent_channels import (
    DEFAULT_MAX_OUTPUTS,
    AdjacentBitsChannel,
    PairTransformKind,
    TransformMode,
    entropy_pair,
    gamma_v,
    init_v2,
    quantize,
    transform,
)
from app.core.channel_model import BmsChannel

logger = logging.getLogger(__name__)

# --- Constants ---
SPEC_FORMAT = "abs-polar-code"
SPEC_VERSION = 1
MIN_CONSTRUCTION_OUTPUTS = 16
CODE_MODES = ("standard", "abs", "abs+")
CodeMode = Literal["standard", "abs", "abs+"]


def is_power_of_two(value: int) -> bool:
    return value >= 1 and value & (value - 1) == 0


def layer_sizes(n: int) -> List[int]:
    """Sizes 4, 8, ..., n of the layers that may carry pair transforms."""
    sizes, size = [], 4
    while size <= n:
        sizes.append(size)
        size *= 2
    return sizes


def check_layer_sets(size: int, swap: Iterable[int], arikan: Iterable[int]):
    """Raises ValueError unless the two sets are a valid transform layout for `size`."""
    swap, arikan = set(swap), set(arikan)
    if swap & arikan:
        raise ValueError(f"layer {size}: positions {sorted(swap & arikan)} are both swap and Arikan")
    chosen = sorted(swap | arikan)
    for position in chosen:
        if position % 2 or not 2 <= position <= size - 2:
            raise ValueError(f"layer {size}: position {position} must be even and within 2..{size - 2}")
    for left, right in zip(chosen, chosen[1:]):
        if right - left < 4:
            raise ValueError(f"layer {size}: positions {left} and {right} are not separated by at least 4")


class LayerSets(BaseModel):
    """Swap and Arikan positions of one layer."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    size: int
    swap: Tuple[int, ...] = ()
    arikan: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check(self):
        if self.size < 4 or not is_power_of_two(self.size):
            raise ValueError(f"layer size must be a power of two of at least 4, got {self.size}")
        if list(self.swap) != sorted(set(self.swap)) or list(self.arikan) != sorted(set(self.arikan)):
            raise ValueError(f"layer {self.size}: positions must be strictly increasing")
        check_layer_sets(self.size, self.swap, self.arikan)
        return self


class CodeSpec(BaseModel):
    """
    A complete ABS+ (or ABS / standard) polar code.

    Serialized as a versioned JSON document; see README.md for the schema.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    format: Literal["abs-polar-code"] = SPEC_FORMAT
    version: Literal[1] = SPEC_VERSION
    n: int
    k: int
    mode: CodeMode = "abs+"
    layers: Tuple[LayerSets, ...] = ()
    info_set: Tuple[int, ...]
    frozen_values: Tuple[int, ...] = ()

    @model_validator(mode="before")
    @classmethod
    def _default_frozen_values(cls, data):
        if isinstance(data, dict) and not data.get("frozen_values") and "n" in data and "k" in data:
            data = dict(data, frozen_values=[0] * max(int(data["n"]) - int(data["k"]), 0))
        return data

    @model_validator(mode="after")
    def _check(self):
        n, k = self.n, self.k
        if n < 2 or not is_power_of_two(n):
            raise ValueError(f"n must be a power of two of at least 2, got {n}")
        if not 0 <= k <= n:
            raise ValueError(f"k must lie in 0..{n}, got {k}")
        if [layer.size for layer in self.layers] != layer_sizes(n):
            raise ValueError(f"layers must list sizes {layer_sizes(n)} in order")
        if self.mode == "standard" and any(layer.swap or layer.arikan for layer in self.layers):
            raise ValueError("standard codes carry no pair transforms")
        if self.mode == "abs" and any(layer.arikan for layer in self.layers):
            raise ValueError("abs codes carry no Arikan pair transforms")
        if len(self.info_set) != k or list(self.info_set) != sorted(set(self.info_set)):
            raise ValueError(f"info_set must hold {k} distinct increasing positions")
        if self.info_set and not (1 <= self.info_set[0] and self.info_set[-1] <= n):
            raise ValueError(f"info_set positions must lie in 1..{n}")
        if len(self.frozen_values) != n - k or any(v not in (0, 1) for v in self.frozen_values):
            raise ValueError(f"frozen_values must hold {n - k} bits")
        return self

    # --- Derived views (0-based arrays) ---

    def layer(self, size: int) -> Optional[LayerSets]:
        for layer in self.layers:
            if layer.size == size:
                return layer
        return None

    def swap_set(self, size: int) -> FrozenSet[int]:
        layer = self.layer(size)
        return frozenset(layer.swap) if layer else frozenset()

    def arikan_set(self, size: int) -> FrozenSet[int]:
        layer = self.layer(size)
        return frozenset(layer.arikan) if layer else frozenset()

    def info_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[np.asarray(self.info_set, dtype=np.intp) - 1] = True
        return mask

    def frozen_vector(self) -> np.ndarray:
        """Length-n vector holding the frozen values (zeros at information positions)."""
        vector = np.zeros(self.n, dtype=np.int8)
        vector[~self.info_mask()] = self.frozen_values
        return vector

    def to_json(self) -> str:
        return self.model_dump_json(indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CodeSpec":
        return cls.model_validate_json(text)


@dataclass
class LayerChannels:
    """The channels V_1 .. V_{size-1} of one layer."""
    size: int
    channels: List[AdjacentBitsChannel]

    def __post_init__(self):
        if len(self.channels) != self.size - 1:
            raise ValueError(f"layer {self.size} needs {self.size - 1} channels, got {len(self.channels)}")


def layer_mode_plan(size: int, swap_set: Iterable[int], arikan_set: Iterable[int]) -> List[Tuple[int, int, TransformMode]]:
    """
    Which previous-layer channel and kernel produce each slot of a new layer.

    Returns (slot, j, mode) triples for slots 1..size-1 in order: slot is
    produced as transform(V_j, mode) of the layer of size `size` / 2. Swap and
    Arikan positions 2j own slots 2j-1, 2j, 2j+1. Otherwise 2j uses the mid DB
    kernel, 2j-1 the first DB kernel unless 2(j-1) carries a pair transform,
    and the final slot the last DB kernel.
    """
    swap_set, arikan_set = set(swap_set), set(arikan_set)
    check_layer_sets(size, swap_set, arikan_set)
    chosen = swap_set | arikan_set
    plan = []
    for j in range(1, size // 2):
        position = 2 * j
        if position in chosen:
            family = "SDB" if position in swap_set else "ADB"
            for slot, stage in zip((position - 1, position, position + 1), ("first", "mid", "last")):
                plan.append((slot, j, TransformMode.of(family, stage)))
            continue
        if position - 2 not in chosen:
            plan.append((position - 1, j, TransformMode.DB_FIRST))
        plan.append((position, j, TransformMode.DB_MID))
        if j == size // 2 - 1:
            plan.append((position + 1, j, TransformMode.DB_LAST))
    return plan


def score_position(channel: AdjacentBitsChannel, mode: CodeMode = "abs+") -> Tuple[float, PairTransformKind]:
    """
    Gain in polarization from placing a pair transform at position 2j.

    Compares gamma of the plain mid channel (V_j)^◇ against the swapped (◆)
    and, for abs+, the Arikan (◇̇) alternatives.

    Returns:
        (score, best) with score = gamma(◇) - min(gamma(◆), gamma(◇̇)) and best
        the transform attaining the minimum; ties go to SWAP.
    """
    if mode not in ("abs", "abs+"):
        raise ValueError(f"positions are scored only for abs and abs+ codes, got {mode}")
    plain = gamma_v(transform(channel, TransformMode.DB_MID))
    swapped = gamma_v(transform(channel, TransformMode.SDB_MID))
    if mode == "abs":
        return plain - swapped, PairTransformKind.SWAP
    added = gamma_v(transform(channel, TransformMode.ADB_MID))
    if swapped <= added:
        return plain - swapped, PairTransformKind.SWAP
    return plain - added, PairTransformKind.ARIKAN


def select_positions(scores: Sequence[Tuple[int, float]]) -> Set[int]:
    """
    Best-scoring subset of positions 2, 4, ... with no two neighbours chosen.

    Dynamic programming over the positions in order: position t is taken when
    its score plus the best total two steps back strictly beats the best total
    one step back, so zero and negative scores are never taken.
    """
    count = len(scores)
    totals = np.zeros(count + 1)  # totals[t + 1]: best total over the first t + 1 positions
    taken = np.zeros(count, dtype=bool)
    for t, (_, score) in enumerate(scores):
        with_t = (totals[t - 1] if t >= 1 else 0.0) + score
        if with_t > totals[t]:
            totals[t + 1] = with_t
            taken[t] = True
        else:
            totals[t + 1] = totals[t]

    chosen = set()
    t = count - 1
    while t >= 0:
        if taken[t]:
            chosen.add(scores[t][0])
            t -= 2
        else:
            t -= 1
    return chosen


def evolve_layer(prev: LayerChannels, swap_set: Iterable[int], arikan_set: Iterable[int],
                 max_outputs: Optional[int]) -> LayerChannels:
    """Synthesizes and quantizes the channels of the next layer from `prev`."""
    size = 2 * prev.size
    channels: List[Optional[AdjacentBitsChannel]] = [None] * (size - 1)
    for slot, j, mode in layer_mode_plan(size, swap_set, arikan_set):
        channels[slot - 1] = quantize(transform(prev.channels[j - 1], mode), max_outputs)
    return LayerChannels(size, channels)


def initial_layer(channel: BmsChannel, max_outputs: Optional[int]) -> LayerChannels:
    return LayerChannels(2, [quantize(init_v2(channel), max_outputs)])


def layer_bit_entropies(layer: LayerChannels) -> np.ndarray:
    """H_i = H(U_i | U_1..U_{i-1}, Y) for every position of the layer."""
    entropies = np.empty(layer.size)
    for i, channel in enumerate(layer.channels):
        entropies[i] = entropy_pair(channel)[0]
    entropies[-1] = entropy_pair(layer.channels[-1])[1]
    return entropies


def evolve_spec(spec: CodeSpec, channel: BmsChannel, max_outputs: Optional[int] = DEFAULT_MAX_OUTPUTS) -> LayerChannels:
    """Runs the channel evolution of an existing code."""
    layer = initial_layer(channel, max_outputs)
    for size in layer_sizes(spec.n):
        layer = evolve_layer(layer, spec.swap_set(size), spec.arikan_set(size), max_outputs)
    return layer


def bit_channel_entropies(spec: CodeSpec, channel: BmsChannel,
                          max_outputs: Optional[int] = DEFAULT_MAX_OUTPUTS) -> np.ndarray:
    return layer_bit_entropies(evolve_spec(spec, channel, max_outputs))


def gamma_of_entropies(entropies: np.ndarray) -> float:
    return float(np.mean(entropies * (1.0 - entropies)))


def polarization_gamma(spec: CodeSpec, channel: BmsChannel,
                       max_outputs: Optional[int] = DEFAULT_MAX_OUTPUTS) -> float:
    """Mean of H_i (1 - H_i) over the bit-channels of `spec` on `channel`."""
    return gamma_of_entropies(bit_channel_entropies(spec, channel, max_outputs))


def rank_information_set(entropies: np.ndarray, k: int) -> Tuple[int, ...]:
    """The k most reliable positions (lowest entropy, lower index on ties), 1-based and sorted."""
    positions = np.arange(len(entropies))
    order = np.lexsort((positions, entropies))
    return tuple(sorted(int(p) + 1 for p in order[:k]))


@dataclass
class Construction:
    """A constructed code together with the quantities computed on the way."""
    spec: CodeSpec
    entropies: np.ndarray
    gamma: float
    layer_counts: Dict[int, Tuple[int, int]] = field(default_factory=dict)


def build_construction(n: int, k: int, channel: BmsChannel,
                       max_outputs: Optional[int] = DEFAULT_MAX_OUTPUTS,
                       mode: CodeMode = "abs+", progress: bool = False) -> Construction:
    """
    Constructs a code of length n and dimension k for `channel`.

    Args:
        n: Code length, a power of two of at least 4.
        k: Number of information bits, 1..n.
        channel: Channel the code is designed for.
        max_outputs: Quantization budget per synthesized channel (None: lossless only).
        mode: "standard", "abs" (swap transforms only) or "abs+".
        progress: Show a progress bar over layers.

    Returns:
        The Construction holding the CodeSpec and the final bit-channel entropies.
    """
    if n < 4 or not is_power_of_two(n):
        raise ValueError(f"n must be a power of two of at least 4, got {n}")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    if mode not in CODE_MODES:
        raise ValueError(f"mode must be one of {CODE_MODES}, got {mode}")
    if max_outputs is not None and max_outputs < MIN_CONSTRUCTION_OUTPUTS:
        raise ValueError(f"max_outputs must be at least {MIN_CONSTRUCTION_OUTPUTS}, got {max_outputs}")

    layer = initial_layer(channel, max_outputs)
    layer_sets, layer_counts = [], {}
    for size in tqdm(layer_sizes(n), desc="Constructing layers", disable=not progress):
        swap, arikan = set(), set()
        if mode != "standard":
            scored = [score_position(v, mode) for v in layer.channels]
            chosen = select_positions([(2 * j, score) for j, (score, _) in enumerate(scored, start=1)])
            for position in chosen:
                best = scored[position // 2 - 1][1]
                (swap if best is PairTransformKind.SWAP else arikan).add(position)
            check_layer_sets(size, swap, arikan)

        layer = evolve_layer(layer, swap, arikan, max_outputs)
        layer_sets.append(LayerSets(size=size, swap=tuple(sorted(swap)), arikan=tuple(sorted(arikan))))
        layer_counts[size] = (len(swap), len(arikan))
        logger.info("layer %d: %d swap, %d arikan positions", size, len(swap), len(arikan))

    entropies = layer_bit_entropies(layer)
    spec = CodeSpec(n=n, k=k, mode=mode, layers=tuple(layer_sets),
                    info_set=rank_information_set(entropies, k))
    gamma = gamma_of_entropies(entropies)
    logger.info("constructed (%d, %d) %s code, gamma=%.6f", n, k, mode, gamma)
    return Construction(spec=spec, entropies=entropies, gamma=gamma, layer_counts=layer_counts)


def construct(n: int, k: int, channel: BmsChannel,
              max_outputs: Optional[int] = DEFAULT_MAX_OUTPUTS, mode: CodeMode = "abs+") -> CodeSpec:
    """Constructs a code and returns only its CodeSpec; see `build_construction`."""
    return build_construction(n, k, channel, max_outputs, mode).spec
