import json
import logging
import subprocess
import sys

import numpy as np
import pytest

from grpdal import ConfigError
from grpdal.cli import main
from grpdal.harness import (CSV_COLUMNS, build_cell, cache_key, parse_config, parse_config_text,
                            read_csv_rows, report_csv, run_experiment, solver_config)
from grpdal.pgm import read_pgm
from grpdal.solvers import SOLVERS

LASSO = """
kind = lasso
seeds = 0, 1
solvers = pda, grpdal, ip-grpdal
n = 20
p = 20
s = 2
max_iter = 3000
"""


def _write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_lasso():
    cfg = parse_config_text(LASSO + "ip-grpdal.eps = power:1:1.5\n")
    assert cfg.seeds == [0, 1]
    assert cfg.solvers == ["pda", "grpdal", "ip-grpdal"]
    assert cfg.problem["n"] == 20 and cfg.problem["zeta"] == 0.1
    assert str(cfg.overrides["ip-grpdal"]["eps"]) == "power:1:1.5"


@pytest.mark.parametrize("text", [
    "kind = lasso\nsolvers =\n",
    "kind = lasso\n",
    "kind = nonsense\nsolvers = pda\n",
    "kind = lasso\nsolvers = pda, magic\n",
    "kind = lasso\nsolvers = pda\nwidth = 3\n",
    "kind = lasso\nsolvers = pda\nn = ten\n",
    "kind = lasso\nsolvers = pda\nn = 3\nn = 4\n",
    "kind = lasso\nsolvers = pda\ngrpdal.beta = 3\n",
    "kind = lasso\nsolvers = pda\npda.colour = red\n",
    "kind = lasso\nsolvers = pda\nseed = 1\nseeds = 1, 2\n",
    "kind = lasso\nsolvers = pda\njust some words\n",
    "kind = lasso\nsolvers = pda\nreference = maybe\n",
    "kind = tv-deblur\nsolvers = ip-grpdal\nimage = /no/such/file.pgm\n",
    "kind = lasso\nsolvers = ip-grpdal\nip-grpdal.eps = power:1\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.cfg")


def test_solver_config_overrides(tmp_path):
    cfg = parse_config_text(LASSO + "ip-grpdal.beta = 7\nip-grpdal.S = 3\n")
    cell = build_cell(cfg, 0)
    scfg = solver_config(cfg, cell, "ip-grpdal", 0)
    assert scfg.beta == 7.0 and scfg.S.lam == 3.0 and scfg.T.Lam == 0.5
    bad = parse_config_text(LASSO + "ip-grpdal.mu = 2\n")
    with pytest.raises(ConfigError):
        solver_config(bad, cell, "ip-grpdal", 0)


def test_cache_key_sensitivity():
    base = cache_key("lasso", {"n": 10, "p": 10}, 0)
    assert base == cache_key("lasso", {"p": 10, "n": 10}, 0)
    assert base != cache_key("lasso", {"n": 11, "p": 10}, 0)
    assert base != cache_key("lasso", {"n": 10, "p": 10}, 1)


def test_run_writes_outputs_and_parses_back(tmp_path):
    cfg = parse_config_text(LASSO)
    status, summary = run_experiment(cfg, out=tmp_path / "out", timing=False)
    assert status == 0
    files = sorted(p.name for p in (tmp_path / "out").iterdir())
    assert files == sorted([f"lasso_seed{s}_{n}.csv" for s in (0, 1)
                            for n in ("pda", "grpdal", "ip-grpdal")] + ["summary.json"])
    data = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert set(data["aggregate"]) == {"pda", "grpdal", "ip-grpdal"}
    assert {r["status"] for r in data["runs"]} <= {"converged", "budget-exhausted"}
    assert data["runs"][0]["status"] == "converged"

    cell = build_cell(cfg, 0)
    rep = SOLVERS["grpdal"](cell.problem, solver_config(cfg, cell, "grpdal", 0), x0=cell.x0, y0=cell.y0)
    rows = read_csv_rows(tmp_path / "out" / "lasso_seed0_grpdal.csv")
    assert len(rows) == rep.iterations
    for got, want in zip(rows, rep.rows):
        for c in CSV_COLUMNS[1:-1]:
            same = got[c] == want[c] or (np.isnan(got[c]) and np.isnan(want[c]))
            assert same, c
        assert got["elapsed"] == 0.0
    assert report_csv(rep, timing=False) == (tmp_path / "out" / "lasso_seed0_grpdal.csv").read_text()


def test_rerun_is_byte_identical_and_hits_cache(tmp_path, caplog):
    path = _write(tmp_path, LASSO.replace("seeds = 0, 1", "seed = 3"))
    assert main(["run", str(path), "--out", str(tmp_path / "a"), "--no-timing"]) == 0
    with caplog.at_level(logging.INFO, logger="grpdal.harness"):
        assert main(["run", str(path), "--out", str(tmp_path / "b"), "--no-timing"]) == 0
    assert any("reference cache hit" in r.getMessage() for r in caplog.records)
    for name in ("pda", "grpdal", "ip-grpdal"):
        f = f"lasso_seed3_{name}.csv"
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_reference_load_policy_requires_cache(tmp_path):
    path = _write(tmp_path, LASSO + "reference = load\n")
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 1
    path2 = _write(tmp_path, LASSO, "ref.cfg")
    assert main(["ref", str(path2)]) == 0
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 0


def test_seed_flag_limits_run(tmp_path):
    path = _write(tmp_path, LASSO.replace("pda, grpdal, ip-grpdal", "grpdal"))
    assert main(["run", str(path), "--seed", "1", "--out", str(tmp_path / "o")]) == 0
    assert [p.name for p in (tmp_path / "o").glob("*.csv")] == ["lasso_seed1_grpdal.csv"]


def test_exit_codes(tmp_path, capsys):
    assert main([]) == 1
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code == 1
    assert main(["run", str(tmp_path / "missing.cfg")]) == 1
    assert "usage" in capsys.readouterr().err
    # a metric below the eigenvalue gate makes the solver refuse to run
    path = _write(tmp_path, LASSO + "ip-grpdal.S = 0.5\n")
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 2


def test_inexact_failure_exits_2(tmp_path):
    text = "kind = tv-deblur\nsize = 16\nsolvers = ip-grpdal\nmax_iter = 5\nip-grpdal.inner_max_iter = 1\n" \
           "ip-grpdal.delta = power:1e-12:2\n"
    path = _write(tmp_path, text)
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    data = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert data["runs"][0]["status"] == "inexact-solve-failed"


def test_tv_run_emits_pgm(tmp_path):
    text = "kind = tv-deblur\nsize = 16\nsolvers = ip-grpdal\nmax_iter = 300\n"
    path = _write(tmp_path, text)
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 0
    img = read_pgm(tmp_path / "o" / "tv-deblur_seed0_ip-grpdal.pgm")
    assert img.shape == (16, 16)
    assert read_pgm(tmp_path / "o" / "tv-deblur_seed0_observed.pgm").shape == (16, 16)
    run = json.loads((tmp_path / "o" / "summary.json").read_text())["runs"][0]
    assert run["relative_residual"] >= -1e-9


def test_tv_image_from_file(tmp_path, rng):
    from grpdal.pgm import write_pgm
    write_pgm(tmp_path / "img.pgm", rng.random((12, 10)))
    cfg = parse_config(_write(tmp_path, "kind = tv-deblur\nimage = img.pgm\nsolvers = ip-grpdal\n"))
    cell = build_cell(cfg, 0)
    assert cell.instance.shape == (12, 10)


def test_synthetic_kind(tmp_path):
    text = "kind = synthetic-strongly-convex\ndim = 10\nsolvers = ip-grpdal-accel-full, pda\n" \
           "max_iter = 2000\ntol_gap = 1e-6\n"
    status, summary = run_experiment(parse_config_text(text), out=tmp_path / "o")
    assert status == 0
    assert all(r["status"] == "converged" for r in summary["runs"])


def test_check_command_passes():
    out = subprocess.run([sys.executable, "-m", "grpdal.cli", "check"], capture_output=True,
                         text=True, timeout=60)
    assert out.returncode == 0, out.stdout + out.stderr
    assert "0 failure(s)" in out.stdout
