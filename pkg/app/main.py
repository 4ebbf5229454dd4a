# app/main.py
"""
Main entry point for the abs-polar command-line tool.

Subcommands:
1. construct: build an ABS+ (or ABS / standard) polar code for a channel and save its CodeSpec.
2. encode:    encode a message with a CodeSpec.
3. decode:    SC, SC-list or CRC-aided SC-list decode a priors file.
4. simulate:  Monte-Carlo WER/BER over the BI-AWGN channel, saved as CSV.
5. analyze:   print the bit-channel entropies and the polarization level of a code.

Exit codes: 0 on success, 2 for invalid flags, 3 for unreadable or malformed files.

To run this script:
    python -m app.main construct --n 256 --k 128 --channel biawgn:2,0.5 --out codes/abs_plus_256_128.json
"""
import argparse
import logging
import os
import sys
import time
from datetime import datetime
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

# --- Boilerplate to make sibling packages accessible ---
# Ensures that the script can find and import modules from the `app` package
# regardless of where the script is executed from.
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)
# ---------------------------------------------------

from app.core.adjacent_channels import DEFAULT_MAX_OUTPUTS
from app.core.channel_model import capacity
from app.core.construction import CODE_MODES, bit_channel_entropies, build_construction, gamma_of_entropies
from app.core.crc import CRC_POLYNOMIALS, crc_append, crc_check, crc_scheme
from app.core.encoder import encode
from app.core.list_decoder import scl_decode
from app.core.sc_decoder import ChannelPriors, sc_decode, sc_decode_space_efficient
from app.core.simulation import SimConfig, SimRun, StoppingRule, best_crc_per_point, results_frame, run_curve
from app.parsers.spec_parser import (
    DataFormatError,
    UsageError,
    format_bits,
    load_priors,
    load_sim_config,
    load_spec,
    parse_channel_flag,
    parse_ebn0_grid,
    parse_message,
    save_spec,
)
from app.utils.file_handler import save_priors, save_text, save_to_csv

# --- Constants ---
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3
DEFAULT_RESULTS_DIR = "results"


class Console:
    """Step banners on stdout, silenced by --quiet; diagnostics always go to stderr."""

    def __init__(self, quiet: bool = False):
        self.quiet = quiet

    def say(self, text: str = ""):
        if not self.quiet:
            print(text)

    @staticmethod
    def error(text: str):
        print(f"🚨 {text}", file=sys.stderr)


def generate_filename(spec_paths: List[str]) -> str:
    """
    Creates a descriptive and unique CSV filename for a simulation.

    :param spec_paths: The CodeSpec files being simulated.
    :return: e.g. "wer_abs_plus_256_128_20240921_143000.csv".
    """
    stem = os.path.splitext(os.path.basename(spec_paths[0]))[0] if spec_paths else "generic"
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    return f"wer_{stem}_{timestamp}.csv"


def parse_mu(text: str) -> Optional[int]:
    """Quantization budget: a positive integer, or 'inf' / 'none' for lossless evolution."""
    if text.strip().lower() in ("inf", "none"):
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--mu must be an integer or 'inf', got {text!r}") from None


def check_crc(length: Optional[int], k: int) -> Optional[int]:
    if length is None:
        return None
    if length not in CRC_POLYNOMIALS:
        raise UsageError(f"--crc {length} is not supported; choose from {sorted(CRC_POLYNOMIALS)}")
    if length >= k:
        raise UsageError(f"--crc {length} leaves no payload in {k} information bits")
    return length


# --- Subcommands ---

def cmd_construct(args, console: Console) -> int:
    channel = parse_channel_flag(args.channel)
    if args.mu is not None and args.mu < 16:
        raise UsageError(f"--mu must be at least 16, got {args.mu}")

    console.say(f"\n[Step 1/2] Constructing ({args.n}, {args.k}) {args.mode} code over {args.channel}...")
    try:
        result = build_construction(args.n, args.k, channel, args.mu, args.mode, progress=not console.quiet)
    except ValueError as e:
        raise UsageError(str(e)) from e
    for size, (swaps, ariks) in result.layer_counts.items():
        console.say(f"  - layer {size:>5}: |I_S| = {swaps:<4} |I_A| = {ariks}")
    console.say(f"✅ Construction complete. Gamma = {result.gamma:.6f}")

    console.say("\n[Step 2/2] Saving CodeSpec...")
    path = save_spec(result.spec, args.out)
    console.say(f"✅ Saved to {path}")
    return EXIT_OK


def cmd_encode(args, console: Console) -> int:
    spec = load_spec(args.spec)
    crc_length = check_crc(args.crc, spec.k)
    payload_bits = spec.k - (crc_length or 0)

    console.say(f"\n[Step 1/2] Encoding {payload_bits} payload bits with ({spec.n}, {spec.k}) {spec.mode} code...")
    try:
        payload = parse_message(args.message, payload_bits)
    except DataFormatError as e:
        raise UsageError(f"--message: {e}") from e
    message = payload if crc_length is None else crc_append(payload, crc_scheme(crc_length))
    codeword = encode(spec, message)
    console.say("✅ Encoding complete.")

    console.say("\n[Step 2/2] Writing codeword...")
    text = format_bits(codeword) + "\n"
    if args.out:
        save_text(text, args.out)
        console.say(f"✅ Saved codeword to {args.out}")
    else:
        sys.stdout.write(text)
    if args.priors_out:
        save_priors(ChannelPriors.noiseless(codeword), args.priors_out)
        console.say(f"✅ Saved noiseless priors to {args.priors_out}")
    return EXIT_OK


def cmd_decode(args, console: Console) -> int:
    if args.list < 1:
        raise UsageError(f"--list must be at least 1, got {args.list}")
    if args.space_efficient and (args.list > 1 or args.crc is not None):
        raise UsageError("--space-efficient applies to plain SC decoding only")
    spec = load_spec(args.spec)
    crc_length = check_crc(args.crc, spec.k)
    priors = load_priors(args.priors, spec.n)

    use_list = args.list > 1 or crc_length is not None
    name = f"SCL L={args.list}" if use_list else "SC"
    if crc_length is not None:
        name += f" + CRC-{crc_length}"
    console.say(f"\n[Step 1/2] Decoding with {name}...")
    if use_list:
        message, report = scl_decode(spec, priors, args.list, crc_scheme(crc_length) if crc_length else None)
        console.say(f"✅ Decoding complete. Path metric = {report.metric:.6f}")
        if report.crc_fallback:
            console.say("  - no path passed the CRC; returning the best-metric path")
    else:
        decoder = sc_decode_space_efficient if args.space_efficient else sc_decode
        message, _ = decoder(spec, priors)
        console.say("✅ Decoding complete.")
    if crc_length is not None:
        console.say(f"  - CRC-{crc_length}: {'pass' if crc_check(message, crc_scheme(crc_length)) else 'FAIL'}")

    console.say("\n[Step 2/2] Writing payload...")
    payload = message[:spec.k - (crc_length or 0)]
    text = format_bits(payload) + "\n"
    if args.out:
        save_text(text, args.out)
        console.say(f"✅ Saved payload to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _config_from_flags(args) -> SimConfig:
    if args.decoder == "sc" and (args.list != 1 or args.crc is not None):
        raise UsageError("--list and --crc need --decoder scl")
    runs = []
    for path in args.spec:
        stem = os.path.splitext(os.path.basename(path))[0]
        label = f"{stem} L={args.list}" if args.decoder == "scl" else f"{stem} SC"
        runs.append(SimRun(label=label, spec=path, decoder=args.decoder, list_size=args.list,
                           crc=args.crc, space_efficient=args.space_efficient))
    return SimConfig(
        runs=runs,
        ebn0_db=parse_ebn0_grid(args.ebn0),
        stopping=StoppingRule(min_trials=args.min_trials, min_word_errors=args.min_errors,
                              max_trials=args.max_trials),
        seed=args.seed,
        workers=args.workers,
        batch_size=args.batch_size,
    )


def cmd_simulate(args, console: Console) -> int:
    if args.config:
        config = load_sim_config(args.config)
        if args.workers is not None:
            config = config.model_copy(update={"workers": args.workers})
    else:
        if args.ebn0 is None:
            raise UsageError("--ebn0 is required with --spec")
        args.workers = args.workers or 1
        try:
            config = _config_from_flags(args)
        except ValidationError as e:
            raise UsageError(str(e.errors()[0].get("msg", e))) from e

    specs = {}
    for run in config.runs:
        if run.spec not in specs:
            specs[run.spec] = load_spec(run.spec)
        check_crc(run.crc, specs[run.spec].k)

    console.say(f"\n[Step 1/3] Simulating {len(config.runs)} runs at {len(config.ebn0_db)} Eb/N0 points "
                f"(seed {config.seed}, {config.workers} workers)...")
    results = run_curve(config, specs, progress=not console.quiet)
    console.say("✅ Simulation complete.")

    console.say("\n[Step 2/3] Saving results to CSV...")
    table = results_frame(results)
    out = args.out or os.path.join(DEFAULT_RESULTS_DIR, generate_filename([run.spec for run in config.runs]))
    save_to_csv(table, os.path.dirname(out), os.path.basename(out))
    console.say(f"✅ Saved {len(table)} rows to {out}")

    console.say("\n[Step 3/3] Summary")
    for label, block in table.groupby("spec", sort=False):
        console.say(f"\n[+] {label}")
        for row in block.itertuples(index=False):
            crc = f" CRC-{row.crc}" if row.crc else ""
            console.say(f"  - {row.ebn0_db:5.2f} dB{crc}: WER {row.wer:.3e} "
                        f"[{row.wer_lo:.3e}, {row.wer_hi:.3e}]  BER {row.ber:.3e}  ({row.trials} trials)")
    if table.groupby(["spec", "decoder", "L", "ebn0_db"])["crc"].nunique().gt(1).any():
        console.say("\n[+] Best CRC length per point:")
        for row in best_crc_per_point(table).itertuples(index=False):
            console.say(f"  - {row.spec} @ {row.ebn0_db:.2f} dB: CRC-{row.crc} (WER {row.wer:.3e})")
    return EXIT_OK


def cmd_analyze(args, console: Console) -> int:
    """
    Prints H[i] per position, then sum H, n(1-I(W)) and Gamma.

    These lines are the command's result, not progress, so --quiet keeps them;
    it only drops the step banner.
    """
    spec = load_spec(args.spec)
    channel = parse_channel_flag(args.channel)

    console.say(f"\n[Step 1/1] Evolving bit-channels of ({spec.n}, {spec.k}) {spec.mode} code over {args.channel}...")
    entropies = bit_channel_entropies(spec, channel, args.mu)
    for position, value in enumerate(entropies, start=1):
        marker = "*" if position in spec.info_set else " "
        print(f"H[{position:>5}]{marker} = {value:.12f}")
    print(f"sum H      = {entropies.sum():.12f}")
    print(f"n(1-I(W))  = {spec.n * (1.0 - capacity(channel)):.12f}")
    print(f"Gamma      = {gamma_of_entropies(np.asarray(entropies)):.12f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abs-polar", description="ABS+ polar code construction, coding and simulation")
    parser.add_argument("--verbose", action="store_true", help="Log progress details to stderr.")
    parser.add_argument("--quiet", action="store_true", help="Suppress step banners and progress bars.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="Construct a code and save its CodeSpec.")
    p.add_argument("--n", type=int, required=True, help="Code length, a power of two (>= 4).")
    p.add_argument("--k", type=int, required=True, help="Number of information bits.")
    p.add_argument("--channel", required=True, help="bsc:p | bec:e | biawgn:ebn0,rate[,bins]")
    p.add_argument("--mode", choices=CODE_MODES, default="abs+", help="Code family (default: abs+).")
    p.add_argument("--mu", type=parse_mu, default=DEFAULT_MAX_OUTPUTS,
                   help=f"Quantization budget per channel, or 'inf' (default: {DEFAULT_MAX_OUTPUTS}).")
    p.add_argument("--out", required=True, help="Output CodeSpec path.")
    p.set_defaults(handler=cmd_construct)

    p = sub.add_parser("encode", help="Encode a message.")
    p.add_argument("--spec", required=True, help="CodeSpec file.")
    p.add_argument("--message", required=True, help="Payload as a 0/1 string or 0x-prefixed hex.")
    p.add_argument("--crc", type=int, default=None, help="Append a CRC of this length (4, 8, 12, 16, 20).")
    p.add_argument("--out", default=None, help="Codeword output file (default: stdout).")
    p.add_argument("--priors-out", default=None, help="Also write noiseless priors of the codeword.")
    p.set_defaults(handler=cmd_encode)

    p = sub.add_parser("decode", help="Decode a priors file.")
    p.add_argument("--spec", required=True, help="CodeSpec file.")
    p.add_argument("--priors", required=True, help="Priors file: n lines of 'w0 w1'.")
    p.add_argument("--list", type=int, default=1, help="List size L (default: 1, plain SC).")
    p.add_argument("--crc", type=int, default=None, help="CRC length carried in the last information bits.")
    p.add_argument("--space-efficient", action="store_true", help="Use the O(n)-memory SC decoder.")
    p.add_argument("--out", default=None, help="Payload output file (default: stdout).")
    p.set_defaults(handler=cmd_decode)

    p = sub.add_parser("simulate", help="Monte-Carlo WER/BER over BI-AWGN.")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="SimConfig JSON file.")
    source.add_argument("--spec", action="append", help="CodeSpec file; repeat for several codes.")
    p.add_argument("--decoder", choices=("sc", "scl"), default="sc")
    p.add_argument("--list", type=int, default=1, help="List size for --decoder scl.")
    p.add_argument("--crc", type=int, default=None, help="CRC length for --decoder scl.")
    p.add_argument("--space-efficient", action="store_true", help="Use the O(n)-memory SC decoder.")
    p.add_argument("--ebn0", default=None, help="Comma-separated Eb/N0 grid in dB, e.g. 1,1.5,2.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help="Worker processes (capped by ABSPOLAR_MAX_WORKERS).")
    p.add_argument("--min-trials", type=int, default=0)
    p.add_argument("--min-errors", type=int, default=StoppingRule().min_word_errors)
    p.add_argument("--max-trials", type=int, default=StoppingRule().max_trials)
    p.add_argument("--batch-size", type=int, default=SimConfig.model_fields["batch_size"].default)
    p.add_argument("--out", default=None, help="CSV output path (default: results/wer_<spec>_<time>.csv).")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("analyze", help="Print bit-channel entropies and Gamma of a code.")
    p.add_argument("--spec", required=True, help="CodeSpec file.")
    p.add_argument("--channel", required=True, help="bsc:p | bec:e | biawgn:ebn0,rate[,bins]")
    p.add_argument("--mu", type=parse_mu, default=DEFAULT_MAX_OUTPUTS,
                   help=f"Quantization budget per channel, or 'inf' (default: {DEFAULT_MAX_OUTPUTS}).")
    p.set_defaults(handler=cmd_analyze)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main function to orchestrate the selected subcommand; returns the exit code."""
    start_time = time.time()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    console = Console(quiet=args.quiet)
    console.say(f"--- abs-polar {args.command} ---")
    try:
        code = args.handler(args, console)
    except UsageError as e:
        console.error(str(e))
        return EXIT_USAGE
    except (DataFormatError, OSError) as e:
        console.error(str(e))
        return EXIT_DATA

    console.say(f"\n[+] Total processing time: {time.time() - start_time:.2f} seconds")
    return code


if __name__ == "__main__":
    sys.exit(main())
