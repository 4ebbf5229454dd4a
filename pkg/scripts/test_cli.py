# scripts/test_cli.py

import sys
import os
import json

import numpy as np
import pandas as pd
import pytest

# --- Boilerplate to make sibling packages accessible ---
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)
# ---------------------------------------------------

from app.core.encoder import encode
from app.main import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from app.parsers.spec_parser import format_bits, load_spec

FIXTURE_PATH = os.path.join(project_root, 'codes', 'abs_plus_16_8.json')


def run(*argv):
    return main(["--quiet", *[str(a) for a in argv]])


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "construct" in capsys.readouterr().out


def test_construct_is_deterministic(tmp_path):
    first, second = tmp_path / 'a.json', tmp_path / 'b.json'
    for out in (first, second):
        assert run("construct", "--n", 16, "--k", 8, "--channel", "bsc:0.11", "--mu", 16, "--out", out) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    spec = load_spec(first)
    assert (spec.n, spec.k, spec.mode) == (16, 8, "abs+")


@pytest.mark.parametrize("argv", [
    ["construct", "--n", 16, "--k", 8, "--channel", "bsc:0.1", "--mu", 8],
    ["construct", "--n", 12, "--k", 8, "--channel", "bsc:0.1"],
    ["construct", "--n", 16, "--k", 20, "--channel", "bsc:0.1"],
    ["construct", "--n", 16, "--k", 8, "--channel", "gauss:1"],
    ["construct", "--n", 16, "--k", 8, "--channel", "bsc:0.1", "--mu", "lots"],
    ["construct", "--n", 16, "--channel", "bsc:0.1"],
    ["frobnicate"],
])
def test_construct_usage_errors(tmp_path, argv):
    assert run(*argv, "--out", tmp_path / 'x.json') == EXIT_USAGE
    assert not (tmp_path / 'x.json').exists()


def test_encode_then_decode_through_files(tmp_path, capsys):
    spec = load_spec(FIXTURE_PATH)
    priors = tmp_path / 'priors.txt'
    assert run("encode", "--spec", FIXTURE_PATH, "--message", "10110001", "--priors-out", priors) == EXIT_OK
    codeword = capsys.readouterr().out.strip()
    assert codeword == format_bits(encode(spec, [1, 0, 1, 1, 0, 0, 0, 1]))

    out = tmp_path / 'payload.txt'
    assert run("decode", "--spec", FIXTURE_PATH, "--priors", priors, "--out", out) == EXIT_OK
    assert out.read_text(encoding='utf-8') == "10110001\n"
    assert run("decode", "--spec", FIXTURE_PATH, "--priors", priors, "--space-efficient") == EXIT_OK
    assert capsys.readouterr().out == "10110001\n"


def test_crc_aided_roundtrip(tmp_path, capsys):
    codeword, priors = tmp_path / 'codeword.txt', tmp_path / 'priors.txt'
    assert run("encode", "--spec", FIXTURE_PATH, "--message", "0xA", "--crc", 4,
               "--out", codeword, "--priors-out", priors) == EXIT_OK
    assert len(codeword.read_text(encoding='utf-8').strip()) == 16
    assert run("decode", "--spec", FIXTURE_PATH, "--priors", priors, "--list", 4, "--crc", 4) == EXIT_OK
    assert capsys.readouterr().out == "1010\n"


def test_decode_recovers_from_soft_priors(tmp_path, capsys):
    spec = load_spec(FIXTURE_PATH)
    codeword = encode(spec, [0, 1, 1, 0, 1, 0, 0, 1])
    rng = np.random.default_rng(4)
    confidence = np.where(rng.random(16) < 0.3, 0.6, 0.9)
    likelihoods = np.column_stack((confidence, 1 - confidence))
    likelihoods[codeword == 1] = likelihoods[codeword == 1][:, ::-1]
    priors = tmp_path / 'soft.txt'
    priors.write_text("# soft observation\n" + "".join(f"{a}, {b}\n" for a, b in likelihoods), encoding='utf-8')
    assert run("decode", "--spec", FIXTURE_PATH, "--priors", priors, "--list", 256) == EXIT_OK
    assert capsys.readouterr().out == "01101001\n"


def test_data_errors(tmp_path):
    bad_priors = tmp_path / 'bad.txt'
    bad_priors.write_text("0.5 0.5\n" * 15, encoding='utf-8')
    assert run("decode", "--spec", FIXTURE_PATH, "--priors", bad_priors) == EXIT_DATA
    assert run("decode", "--spec", tmp_path / 'missing.json', "--priors", bad_priors) == EXIT_DATA

    broken_spec = tmp_path / 'broken.json'
    document = json.loads(open(FIXTURE_PATH, encoding='utf-8').read())
    document["info_set"] = [1, 2, 3]
    broken_spec.write_text(json.dumps(document), encoding='utf-8')
    assert run("encode", "--spec", broken_spec, "--message", "0x00") == EXIT_DATA


def test_usage_errors(tmp_path, capsys):
    priors = tmp_path / 'priors.txt'
    priors.write_text("0.9 0.1\n" * 16, encoding='utf-8')
    assert run("decode", "--spec", FIXTURE_PATH, "--priors", priors, "--list", 4, "--space-efficient") == EXIT_USAGE
    assert run("decode", "--spec", FIXTURE_PATH, "--priors", priors, "--list", 0) == EXIT_USAGE
    assert run("decode", "--spec", FIXTURE_PATH, "--priors", priors, "--crc", 7) == EXIT_USAGE
    assert run("decode", "--spec", FIXTURE_PATH, "--priors", priors, "--crc", 8) == EXIT_USAGE
    assert run("encode", "--spec", FIXTURE_PATH, "--message", "101") == EXIT_USAGE
    assert run("encode", "--spec", FIXTURE_PATH, "--message", "0x1FF") == EXIT_USAGE
    err = capsys.readouterr().err
    assert err.count("🚨") == 6


def test_analyze_matches_the_chain_rule(capsys):
    assert run("analyze", "--spec", FIXTURE_PATH, "--channel", "bec:0.5", "--mu", "inf") == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    entropies = [float(line.split("=")[1]) for line in lines if line.startswith("H[")]
    assert len(entropies) == 16
    assert len(lines) == 16 + 3
    assert all(0.0 <= h <= 1.0 for h in entropies)
    totals = {line.split("=")[0].strip(): float(line.split("=")[1]) for line in lines if not line.startswith("H[")}
    assert totals["sum H"] == pytest.approx(8.0, abs=1e-9)
    assert totals["n(1-I(W))"] == pytest.approx(8.0, abs=1e-12)
    assert sum(entropies) == pytest.approx(totals["sum H"], abs=1e-9)
    assert sum(1 for line in lines if line.startswith("H[") and "*" in line.split("=")[0]) == 8


def test_simulate_from_flags(tmp_path):
    out = tmp_path / 'results' / 'wer.csv'
    argv = ["simulate", "--spec", FIXTURE_PATH, "--decoder", "scl", "--list", 2, "--ebn0", "1,2",
            "--min-trials", 40, "--max-trials", 40, "--seed", 3, "--out", out]
    assert run(*argv) == EXIT_OK
    table = pd.read_csv(out)
    assert list(table["ebn0_db"]) == [1.0, 2.0]
    assert set(table["trials"]) == {40}
    assert list(table["spec"]) == ["abs_plus_16_8 L=2"] * 2

    first = out.read_bytes()
    assert run(*argv) == EXIT_OK
    table_again = pd.read_csv(out)
    pd.testing.assert_frame_equal(table.drop(columns="seconds"), table_again.drop(columns="seconds"))
    assert first.splitlines()[0] == out.read_bytes().splitlines()[0]


def test_simulate_from_config(tmp_path, capsys):
    config = {
        "runs": [
            {"label": "SC", "spec": FIXTURE_PATH},
            {"label": "SCL L=4", "spec": FIXTURE_PATH, "decoder": "scl", "list_size": 4},
            {"label": "SCL L=4 CRC", "spec": FIXTURE_PATH, "decoder": "scl", "list_size": 4, "crc": 4},
            {"label": "SCL L=4 CRC", "spec": FIXTURE_PATH, "decoder": "scl", "list_size": 4, "crc": 8},
        ],
        "ebn0_db": [1.0, 3.0],
        "stopping": {"min_trials": 30, "max_trials": 30},
        "seed": 9,
    }
    config_path = tmp_path / 'sim.json'
    config_path.write_text(json.dumps(config), encoding='utf-8')
    out = tmp_path / 'wer.csv'

    # CRC-8 leaves no payload in 8 information bits
    assert run("simulate", "--config", config_path, "--out", out) == EXIT_USAGE

    config["runs"][3]["crc"] = 4
    config["runs"][2]["crc"] = 4
    config["runs"][3]["label"] = "SCL L=4 CRC-4 again"
    config_path.write_text(json.dumps(config), encoding='utf-8')
    capsys.readouterr()
    assert main(["simulate", "--config", str(config_path), "--out", str(out)]) == EXIT_OK
    table = pd.read_csv(out)
    assert list(table["spec"]) == ["SC", "SC", "SCL L=4", "SCL L=4", "SCL L=4 CRC", "SCL L=4 CRC",
                                   "SCL L=4 CRC-4 again", "SCL L=4 CRC-4 again"]
    # paired noise: the two identical runs see identical trials
    np.testing.assert_array_equal(table["word_errors"][4:6], table["word_errors"][6:8])
    assert "[Step 3/3] Summary" in capsys.readouterr().out


def test_simulate_usage_errors(tmp_path):
    out = tmp_path / 'wer.csv'
    assert run("simulate", "--spec", FIXTURE_PATH, "--out", out) == EXIT_USAGE
    assert run("simulate", "--spec", FIXTURE_PATH, "--ebn0", "1", "--list", 4, "--out", out) == EXIT_USAGE
    assert run("simulate", "--spec", FIXTURE_PATH, "--ebn0", "", "--out", out) == EXIT_USAGE
    assert run("simulate", "--spec", FIXTURE_PATH, "--ebn0", "1", "--min-errors", 0, "--out", out) == EXIT_USAGE
    assert run("simulate", "--config", out, "--spec", FIXTURE_PATH) == EXIT_USAGE
    assert run("simulate", "--config", tmp_path / 'missing.json') == EXIT_DATA
    assert not out.exists()
