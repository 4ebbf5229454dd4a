# app/core/simulation.py
"""
Seeded Monte-Carlo link simulation over the binary-input AWGN channel.

One trial draws a payload, appends the CRC when configured, encodes, maps
0 -> +1 and 1 -> -1, adds Gaussian noise, turns the received values into
likelihood pairs and decodes. Word and bit errors are counted on the payload.

Randomness is derived per trial from (seed, point, trial), so a point's counts
depend only on the configuration. Trials run in fixed batches; a wave of
batches is handed to the joblib worker pool, the batches are folded in order
and the stopping rule is checked after every batch, which makes the result
independent of the worker count.
"""

import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import norm
from tqdm import tqdm

from app.core.channel_model import awgn_noise_variance
from app.core.construction import CodeSpec
from app.core.crc import CRC_POLYNOMIALS, CrcScheme, crc_append, crc_scheme
from app.core.encoder import encode
from app.core.list_decoder import scl_decode
from app.core.sc_decoder import ChannelPriors, sc_decode, sc_decode_space_efficient

logger = logging.getLogger(__name__)

# --- Constants ---
MAX_WORKERS_ENV = "ABSPOLAR_MAX_WORKERS"
DEFAULT_MIN_WORD_ERRORS = 100
DEFAULT_MAX_TRIALS = 1_000_000
DEFAULT_BATCH_SIZE = 100
CONFIDENCE = 0.95
NOISE_STREAM, PAYLOAD_STREAM = 0, 1
CSV_COLUMNS = [
    "spec", "decoder", "L", "crc", "ebn0_db", "trials", "word_errors",
    "wer", "wer_lo", "wer_hi", "ber", "seconds",
]


class StoppingRule(BaseModel):
    """Stop once `min_trials` ran and `min_word_errors` were seen, or at `max_trials`."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    min_trials: int = Field(default=0, ge=0)
    min_word_errors: int = Field(default=DEFAULT_MIN_WORD_ERRORS, ge=1)
    max_trials: int = Field(default=DEFAULT_MAX_TRIALS, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if self.min_trials > self.max_trials:
            raise ValueError(f"min_trials {self.min_trials} exceeds max_trials {self.max_trials}")
        return self

    def done(self, trials: int, word_errors: int) -> bool:
        if trials >= self.max_trials:
            return True
        return trials >= self.min_trials and word_errors >= self.min_word_errors


class SimRun(BaseModel):
    """One decoder configuration on one code, e.g. label "ABS+ L=20"."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    label: str
    spec: str
    decoder: Literal["sc", "scl"] = "sc"
    list_size: int = Field(default=1, ge=1)
    crc: Optional[int] = None
    space_efficient: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.decoder == "sc" and self.list_size != 1:
            raise ValueError(f"the sc decoder has list size 1, got {self.list_size}")
        if self.crc is not None and self.crc not in CRC_POLYNOMIALS:
            raise ValueError(f"unsupported CRC length {self.crc}; choose from {sorted(CRC_POLYNOMIALS)}")
        return self

    def crc_scheme(self) -> Optional[CrcScheme]:
        return None if self.crc is None else crc_scheme(self.crc)


class SimConfig(BaseModel):
    """
    A simulation campaign: every run at every Eb/N0 grid point.

    With `paired` set, the noise of a grid point is shared by all runs, so
    decoders are compared on identical realizations.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    runs: List[SimRun] = Field(min_length=1)
    ebn0_db: List[float] = Field(min_length=1)
    stopping: StoppingRule = Field(default_factory=StoppingRule)
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)
    paired: bool = True

    def point_index(self, run_index: int, grid_index: int) -> int:
        if self.paired:
            return grid_index
        return run_index * len(self.ebn0_db) + grid_index


@dataclass
class SimResult:
    """
    Counts of one (run, Eb/N0) point.

    Everything but `seconds` is a function of (config, seed, point). `seconds`
    is the wall time spent on the point and differs between identical runs.
    """
    label: str
    decoder: str
    list_size: int
    crc: int
    ebn0_db: float
    payload_bits: int
    trials: int = 0
    word_errors: int = 0
    bit_errors: int = 0
    seconds: float = 0.0

    @property
    def wer(self) -> float:
        return self.word_errors / self.trials if self.trials else 0.0

    @property
    def ber(self) -> float:
        bits = self.trials * self.payload_bits
        return self.bit_errors / bits if bits else 0.0

    @property
    def wer_interval(self) -> Tuple[float, float]:
        return wilson_interval(self.word_errors, self.trials)

    def add(self, counts: "BatchCounts"):
        self.trials += counts.trials
        self.word_errors += counts.word_errors
        self.bit_errors += counts.bit_errors

    def to_row(self) -> Dict[str, object]:
        low, high = self.wer_interval
        return {
            "spec": self.label,
            "decoder": self.decoder,
            "L": self.list_size,
            "crc": self.crc,
            "ebn0_db": self.ebn0_db,
            "trials": self.trials,
            "word_errors": self.word_errors,
            "wer": self.wer,
            "wer_lo": low,
            "wer_hi": high,
            "ber": self.ber,
            "seconds": round(self.seconds, 3),
        }


@dataclass(frozen=True)
class BatchCounts:
    trials: int
    word_errors: int
    bit_errors: int


def wilson_interval(errors: int, trials: int, confidence: float = CONFIDENCE) -> Tuple[float, float]:
    """Wilson score interval of a binomial proportion; (0, 1) without trials."""
    if not 0 <= errors <= trials:
        raise ValueError(f"need 0 <= errors <= trials, got {errors} of {trials}")
    if trials == 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + confidence / 2)
    p = errors / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, float(centre - half)), min(1.0, float(centre + half))


def resolve_workers(requested: int) -> int:
    """Requested worker count, capped by $ABSPOLAR_MAX_WORKERS when set."""
    cap = os.environ.get(MAX_WORKERS_ENV)
    if cap is None or not cap.strip():
        return max(requested, 1)
    try:
        limit = int(cap)
    except ValueError:
        raise ValueError(f"{MAX_WORKERS_ENV} must be an integer, got {cap!r}") from None
    return max(min(requested, limit), 1)


def trial_generator(seed: int, point: int, trial: int, stream: int) -> np.random.Generator:
    """Philox generator of one trial; stream 0 draws noise, stream 1 the payload."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, point, trial, stream])))


def decode_received(spec: CodeSpec, run: SimRun, priors: ChannelPriors) -> np.ndarray:
    """The k decided information bits under the run's decoder."""
    if run.decoder == "scl":
        message, _ = scl_decode(spec, priors, run.list_size, run.crc_scheme())
    elif run.space_efficient:
        message, _ = sc_decode_space_efficient(spec, priors)
    else:
        message, _ = sc_decode(spec, priors)
    return message


def payload_size(spec: CodeSpec, run: SimRun) -> int:
    payload = spec.k - (run.crc or 0)
    if payload < 1:
        raise ValueError(f"CRC-{run.crc} leaves no payload in {spec.k} information bits")
    return payload


def run_trial(spec: CodeSpec, run: SimRun, ebn0_db: float, seed: int, point: int, trial: int) -> Tuple[int, bool]:
    """(bit errors, word error) of one seeded trial."""
    payload_bits = payload_size(spec, run)
    crc = run.crc_scheme()
    payload = trial_generator(seed, point, trial, PAYLOAD_STREAM).integers(0, 2, payload_bits, dtype=np.int8)
    message = payload if crc is None else crc_append(payload, crc)
    codeword = encode(spec, message)

    variance = awgn_noise_variance(ebn0_db, payload_bits / spec.n)
    noise = trial_generator(seed, point, trial, NOISE_STREAM).normal(0.0, np.sqrt(variance), spec.n)
    received = 1.0 - 2.0 * codeword + noise

    decoded = decode_received(spec, run, ChannelPriors.from_awgn(received, variance))
    bit_errors = int(np.count_nonzero(decoded[:payload_bits] != payload))
    return bit_errors, bit_errors > 0


def run_batch(spec: CodeSpec, run: SimRun, ebn0_db: float, seed: int, point: int,
              start: int, stop: int) -> BatchCounts:
    word_errors = bit_errors = 0
    for trial in range(start, stop):
        bits, word = run_trial(spec, run, ebn0_db, seed, point, trial)
        bit_errors += bits
        word_errors += int(word)
    return BatchCounts(stop - start, word_errors, bit_errors)


def run_point(spec: CodeSpec, run: SimRun, ebn0_db: float, stopping: StoppingRule, seed: int,
              point: int = 0, workers: int = 1, batch_size: int = DEFAULT_BATCH_SIZE) -> SimResult:
    """
    Simulates one run at one Eb/N0 until the stopping rule fires.

    Args:
        spec: The code.
        run: Decoder configuration; its CRC bits take the last information positions.
        ebn0_db: Eb/N0 in dB, with the rate counted on payload bits.
        stopping: When to stop.
        seed: Master seed.
        point: Index mixed into the per-trial seeds.
        workers: joblib worker count (capped by the environment).
        batch_size: Trials per batch.

    Returns:
        The SimResult of the point.
    """
    result = SimResult(
        label=run.label,
        decoder=run.decoder,
        list_size=run.list_size,
        crc=run.crc or 0,
        ebn0_db=float(ebn0_db),
        payload_bits=payload_size(spec, run),
    )
    workers = resolve_workers(workers)
    started = time.perf_counter()
    next_trial = 0
    with Parallel(n_jobs=workers) as parallel:
        while not stopping.done(result.trials, result.word_errors):
            bounds = []
            for _ in range(workers):
                if next_trial >= stopping.max_trials:
                    break
                stop = min(next_trial + batch_size, stopping.max_trials)
                bounds.append((next_trial, stop))
                next_trial = stop
            wave = parallel(
                delayed(run_batch)(spec, run, ebn0_db, seed, point, start, stop) for start, stop in bounds
            )
            for counts in wave:
                result.add(counts)
                if stopping.done(result.trials, result.word_errors):
                    break
    result.seconds = time.perf_counter() - started
    logger.info(
        "%s @ %.2f dB: %d/%d word errors (WER %.3e), %.2f ms per decode",
        run.label, ebn0_db, result.word_errors, result.trials, result.wer,
        1000.0 * result.seconds / max(result.trials, 1),
    )
    return result


def load_run_specs(config: SimConfig, base_dir: Optional[Path] = None) -> Dict[str, CodeSpec]:
    """CodeSpec of every distinct spec path, relative paths resolved against `base_dir`."""
    specs: Dict[str, CodeSpec] = {}
    for run in config.runs:
        if run.spec not in specs:
            path = Path(run.spec)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            specs[run.spec] = CodeSpec.from_json(path.read_text(encoding="utf-8"))
    return specs


def run_curve(config: SimConfig, specs: Optional[Mapping[str, CodeSpec]] = None,
              progress: bool = True) -> List[SimResult]:
    """
    Every run at every grid point, in (run, Eb/N0) order.

    Args:
        config: The campaign.
        specs: CodeSpec per run spec path; loaded from disk when omitted.
        progress: Show a tqdm bar over the points.
    """
    specs = dict(specs) if specs is not None else load_run_specs(config)
    results: List[SimResult] = []
    total = len(config.runs) * len(config.ebn0_db)
    with tqdm(total=total, desc="Simulating", disable=not progress) as bar:
        for run_index, run in enumerate(config.runs):
            spec = specs[run.spec]
            for grid_index, ebn0_db in enumerate(config.ebn0_db):
                bar.set_postfix_str(f"{run.label} @ {ebn0_db:g} dB")
                results.append(run_point(
                    spec, run, ebn0_db, config.stopping, config.seed,
                    point=config.point_index(run_index, grid_index),
                    workers=config.workers,
                    batch_size=config.batch_size,
                ))
                bar.update(1)
    return results


def results_frame(results: List[SimResult]) -> pd.DataFrame:
    return pd.DataFrame([result.to_row() for result in results], columns=CSV_COLUMNS)


def emit_csv(results: List[SimResult]) -> str:
    """CSV text with a header row, one row per result in the given order."""
    return results_frame(results).to_csv(index=False, lineterminator="\n")


def best_crc_per_point(table: pd.DataFrame) -> pd.DataFrame:
    """Per (spec, decoder, L, Eb/N0), the row of the CRC length with the lowest WER."""
    keys = ["spec", "decoder", "L", "ebn0_db"]
    best = table.groupby(keys, sort=False)["wer"].idxmin()
    return table.loc[best.to_numpy()].reset_index(drop=True)
