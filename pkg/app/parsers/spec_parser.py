# app/parsers/spec_parser.py
"""
Readers for the repository's input formats.

- CodeSpec documents (JSON, see README.md).
- Priors files: one line per received position holding two nonnegative reals
  w0 w1 (whitespace or comma separated). Blank lines and '#' comments are skipped.
- Message text: a 0/1 string, or a 0x-prefixed hex number whose k low bits are
  the message, most significant bit first.
- Channel flags: bsc:p, bec:e or biawgn:ebn0,rate[,bins].
- Simulation configs (JSON, the SimConfig schema).

Malformed file contents raise DataFormatError, malformed flags raise UsageError.
OSError from reading a file propagates unchanged.
"""

import re
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import ValidationError

from app.core.channel_model import DEFAULT_BINS, BmsChannel, discretize_biawgn, make_bec, make_bsc
from app.core.construction import CodeSpec
from app.core.sc_decoder import ChannelPriors
from app.core.simulation import SimConfig

PathLike = Union[str, Path]

# --- Constants ---
_SEPARATORS = re.compile(r"[\s,]+")
_BITS = re.compile(r"[01]*")


class DataFormatError(ValueError):
    """An input file does not follow its documented format."""


class UsageError(ValueError):
    """A command-line flag value is invalid."""


def _first_error(error: ValidationError) -> str:
    first = error.errors()[0]
    where = ".".join(str(part) for part in first.get("loc", ())) or "document"
    return f"{where}: {first.get('msg', 'invalid value')}"


def parse_spec(text: str, source: str = "<spec>") -> CodeSpec:
    try:
        return CodeSpec.from_json(text)
    except ValidationError as e:
        raise DataFormatError(f"{source}: {_first_error(e)}") from e


def load_spec(path: PathLike) -> CodeSpec:
    """Reads and validates a CodeSpec document."""
    path = Path(path)
    return parse_spec(path.read_text(encoding="utf-8"), str(path))


def save_spec(spec: CodeSpec, path: PathLike) -> Path:
    """Writes the canonical JSON form of `spec`; equal specs give identical files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(spec.to_json(), encoding="utf-8")
    return path


def parse_priors(text: str, n: Optional[int] = None, source: str = "<priors>") -> ChannelPriors:
    """Priors from text; when `n` is given the file must hold exactly n lines of values."""
    rows = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = _SEPARATORS.split(line)
        if len(fields) != 2:
            raise DataFormatError(f"{source}:{number}: expected two values, got {len(fields)}")
        try:
            pair = [float(field) for field in fields]
        except ValueError:
            raise DataFormatError(f"{source}:{number}: not a number in {line!r}") from None
        if not all(np.isfinite(pair)) or min(pair) < 0 or sum(pair) <= 0:
            raise DataFormatError(f"{source}:{number}: need nonnegative w0, w1 with a positive sum")
        rows.append(pair)
    if not rows:
        raise DataFormatError(f"{source}: no priors found")
    if n is not None and len(rows) != n:
        raise DataFormatError(f"{source}: expected {n} positions, got {len(rows)}")
    return ChannelPriors(np.array(rows))


def load_priors(path: PathLike, n: Optional[int] = None) -> ChannelPriors:
    path = Path(path)
    return parse_priors(path.read_text(encoding="utf-8"), n, str(path))


def parse_message(text: str, k: int) -> np.ndarray:
    """
    Message bits from a 0/1 string or a 0x-prefixed hex number.

    Args:
        text: The message text; whitespace is ignored.
        k: Number of bits expected.

    Returns:
        An int8 array of k bits.
    """
    compact = "".join(text.split())
    if compact.lower().startswith("0x"):
        digits = compact[2:]
        try:
            value = int(digits, 16)
        except ValueError:
            raise DataFormatError(f"invalid hex message {compact!r}") from None
        if value >> k:
            raise DataFormatError(f"hex message {compact} does not fit in {k} bits")
        return np.array([(value >> (k - 1 - j)) & 1 for j in range(k)], dtype=np.int8)
    if not _BITS.fullmatch(compact):
        raise DataFormatError("message must be a 0/1 string or a 0x-prefixed hex number")
    if len(compact) != k:
        raise DataFormatError(f"message must hold {k} bits, got {len(compact)}")
    return np.array([int(c) for c in compact], dtype=np.int8)


def format_bits(bits) -> str:
    return "".join(str(int(b)) for b in np.asarray(bits).reshape(-1))


def parse_channel_flag(text: str) -> BmsChannel:
    """bsc:p, bec:e or biawgn:ebn0,rate[,bins]."""
    kind, _, args = text.partition(":")
    kind = kind.strip().lower()
    try:
        values = [float(v) for v in args.split(",")] if args.strip() else []
    except ValueError:
        raise UsageError(f"channel {text!r}: parameters must be numbers") from None
    try:
        if kind == "bsc" and len(values) == 1:
            return make_bsc(values[0])
        if kind == "bec" and len(values) == 1:
            return make_bec(values[0])
        if kind == "biawgn" and len(values) in (2, 3):
            bins = int(values[2]) if len(values) == 3 else DEFAULT_BINS
            return discretize_biawgn(values[0], values[1], bins)
    except ValueError as e:
        raise UsageError(f"channel {text!r}: {e}") from e
    raise UsageError(f"channel {text!r}: expected bsc:p, bec:e or biawgn:ebn0,rate[,bins]")


def parse_ebn0_grid(text: str) -> List[float]:
    """Comma-separated Eb/N0 values in dB."""
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"Eb/N0 grid {text!r} must be comma-separated numbers") from None
    if not grid:
        raise UsageError("Eb/N0 grid is empty")
    return grid


def parse_sim_config(text: str, source: str = "<config>") -> SimConfig:
    try:
        return SimConfig.model_validate_json(text)
    except ValidationError as e:
        raise DataFormatError(f"{source}: {_first_error(e)}") from e


def load_sim_config(path: PathLike) -> SimConfig:
    """Reads a SimConfig; relative spec paths are taken relative to the config file."""
    path = Path(path)
    config = parse_sim_config(path.read_text(encoding="utf-8"), str(path))
    runs = []
    for run in config.runs:
        spec_path = Path(run.spec)
        if not spec_path.is_absolute():
            run = run.model_copy(update={"spec": str(path.parent / spec_path)})
        runs.append(run)
    return config.model_copy(update={"runs": runs})
