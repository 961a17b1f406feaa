import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from gen2sat.cli import build_parser, dumps, main

GOLDEN = Path(__file__).parent / "golden"
SUBCOMMANDS = ["solve", "gen", "bounds", "explore", "branch", "sweep", "threshold", "rounds"]


def run(*args, stdin=None):
    env = dict(os.environ, COLUMNS="80")
    return subprocess.run([sys.executable, "-m", "gen2sat", *args], input=stdin, capture_output=True, text=True, env=env)


@pytest.mark.parametrize("sub", [None, *SUBCOMMANDS])
def test_help_golden(sub):
    args = ["--help"] if sub is None else [sub, "--help"]
    out = run(*args)
    assert out.returncode == 0
    name = "main" if sub is None else sub
    assert out.stdout == (GOLDEN / f"help_{name}.txt").read_text()


def test_solve_exit_codes(tmp_path):
    unsat = "p cnf 2 4\n1 2 0\n-1 2 0\n1 -2 0\n-1 -2 0\n"
    r = run("solve", stdin=unsat)
    assert r.returncode == 20 and r.stdout.strip() == "UNSAT"
    p = tmp_path / "f.cnf"
    p.write_text("p cnf 3 1\n1 -2 0\n")
    r = run("solve", str(p))
    assert r.returncode == 10 and r.stdout.startswith("SAT\nv ")
    r = run("solve", stdin="p cnf 2 1\n1 0\n")
    assert r.returncode == 1 and "invalid input" in r.stderr


def test_bounds_rho():
    r = run("bounds", "--alphas", "1,1,1")
    assert r.returncode == 0
    assert json.loads(r.stdout)["rho"] == 1.0


def test_gen_roundtrip(tmp_path):
    out = tmp_path / "g.cnf"
    assert run("gen", "--n", "20", "--alphas", "2,2,2", "--seed", "5", "--out", str(out)).returncode == 0
    meta = json.loads((tmp_path / "g.cnf.json").read_text())
    assert meta == {"alpha0": 2.0, "alpha1": 2.0, "alpha2": 2.0, "n": 20, "seed": 5}
    assert run("solve", str(out)).returncode in (10, 20)


def test_explore_jsonl():
    r = run("explore", "--n", "400", "--alphas", "2,2,2", "--seed", "1")
    lines = [json.loads(x) for x in r.stdout.splitlines()]
    assert len(lines) == 22 and lines[-1]["summary"] is True
    assert lines[0]["t"] == 0 and lines[0]["a_pos"] == 1


def test_usage_errors():
    assert run("bounds", "--alphas=-1,1,1").returncode == 2
    assert run("sweep", "--n", "100").returncode == 2
    assert run("gen", "--n", "2", "--alphas", "9,9,9").returncode == 2
    assert run("bounds", "--alphas", "1,1,1", "--bogus").returncode == 2
    assert run("rounds", "--n", "1000", "--alphas", "0.2,0.2,0.2").returncode == 2
    assert run("threshold", "--n", "100").returncode == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("n = 300\nray = 1,1,1\nlambdas = 0.5,2\ntrials = 8\nseed = 3\n")
    r = run("sweep", "--config", str(cfg), "--no-timing", "--trials", "5")
    rows = r.stdout.splitlines()
    assert r.returncode == 0 and len(rows) == 3
    assert rows[1].split(",")[5] == "5"
    cfg.write_text("nope = 1\n")
    assert run("sweep", "--config", str(cfg)).returncode == 2


def test_dumps_precision():
    assert dumps({"x": 0.1, "y": [1, True, None]}) == '{"x": 0.10000000000000001, "y": [1, true, null]}'
    assert json.loads(dumps({"x": 1 / 3}))["x"] == 1 / 3


def test_main_in_process(capsys):
    assert main(["bounds", "--alphas", "4,0,4"]) == 0
    assert json.loads(capsys.readouterr().out)["rho"] == 2.0


def test_parser_lists_all_subcommands():
    text = build_parser().format_help()
    for sub in SUBCOMMANDS:
        assert sub in text
