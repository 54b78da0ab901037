"""Experiment runner: flat key-value configs, seeded instances, CSV/JSON output.

Config grammar (one ``key = value`` per line, ``#`` starts a comment)::

    kind = lasso                  # lasso | tv-deblur | synthetic-strongly-convex
    seeds = 0, 1, 2               # or: seed = 0
    solvers = pda, grpdal, ip-grpdal
    out = results
    n = 100
    ip-grpdal.eps = power:1:2     # per-solver override: <solver>.<field> = value

See README.md for the full list of keys.
"""

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, GRPDALError, InexactSolveFailed, InvalidArgument
from .linops import Metric, operator_norm_in_metric
from .pgm import read_pgm, write_pgm
from .problems import (gen_sparse_recovery, gen_tv_deblur, lasso_reference, lasso_with_reference,
                       phantom, quadratic_saddle, relative_residual, tv_l1_saddle, tv_reference)
from .solvers import (SOLVERS, ErrorSchedule, SolverConfig, compute_strongly_convex_params)

log = logging.getLogger(__name__)

KINDS = ("lasso", "tv-deblur", "synthetic-strongly-convex")
CSV_COLUMNS = ("solver", "k", "objective", "P", "D", "G", "ergodic_G", "tau", "beta", "trials",
               "inner_primal", "inner_dual", "delta", "eps", "elapsed")
SCHEMA_VERSION = 1

# problem keys and their types, per kind
PROBLEM_KEYS = {
    "lasso": {"n": int, "p": int, "s": int, "zeta": float, "noise": float, "gamma": float},
    "tv-deblur": {"size": int, "image": str, "nu": float, "kappa1": float, "density": float,
                  "window": int, "tol_relative": float},
    "synthetic-strongly-convex": {"dim": int, "gamma_f": float, "gamma_g": float},
}
PROBLEM_DEFAULTS = {
    "lasso": {"n": 100, "p": 100, "s": 10, "zeta": 0.1, "noise": 0.1, "gamma": 0.0},
    "tv-deblur": {"size": 64, "image": None, "nu": 0.1, "kappa1": None, "density": 0.2,
                  "window": 9, "tol_relative": 1e-3},
    "synthetic-strongly-convex": {"dim": 50, "gamma_f": 1.0, "gamma_g": 1.0},
}
SOLVER_KEYS = {
    "phi": float, "eta": float, "mu": float, "beta": float, "tau0": float, "sigma": float,
    "delta": ErrorSchedule.parse, "eps": ErrorSchedule.parse, "max_iter": int,
    "tol_objective": float, "tol_gap": float, "trial": str, "S": str, "T": str,
    "inner_start": str, "inner_max_iter": int,
}
GLOBAL_KEYS = {"kind", "seed", "seeds", "solvers", "out", "reference", "reference_budget",
               "max_iter", "tol_objective", "tol_gap"}


@dataclass
class ExperimentConfig:
    kind: str
    seeds: list
    solvers: list
    out: str = "results"
    problem: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    reference: str = "compute"
    reference_budget: int = 200000
    max_iter: int = 100000
    tol_objective: float = 1e-10
    tol_gap: float = None
    source: str = ""


def _convert(key, conv, value, lineno):
    try:
        return conv(value)
    except (ValueError, InvalidArgument) as exc:
        raise ConfigError(f"line {lineno}: bad value {value!r} for {key!r}: {exc}") from None


def parse_config_text(text, source="<string>"):
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = (value, lineno)

    kind = raw.pop("kind", (None, 0))[0]
    if kind not in KINDS:
        raise ConfigError(f"{source}: kind must be one of {', '.join(KINDS)}, got {kind!r}")
    solvers_txt = raw.pop("solvers", ("", 0))[0]
    solvers = [s.strip() for s in solvers_txt.split(",") if s.strip()]
    if not solvers:
        raise ConfigError(f"{source}: at least one solver is required")
    for s in solvers:
        if s not in SOLVERS:
            raise ConfigError(f"{source}: unknown solver {s!r}; known: {', '.join(SOLVERS)}")

    if "seeds" in raw and "seed" in raw:
        raise ConfigError(f"{source}: give either seed or seeds, not both")
    seeds_txt, ln = raw.pop("seeds", raw.pop("seed", ("0", 0)))
    seeds = [_convert("seeds", int, t.strip(), ln) for t in seeds_txt.split(",") if t.strip()]
    if not seeds:
        raise ConfigError(f"{source}: empty seed list")

    cfg = ExperimentConfig(kind=kind, seeds=seeds, solvers=solvers, source=source)
    cfg.problem = dict(PROBLEM_DEFAULTS[kind])
    for key in list(raw):
        value, ln = raw[key]
        if key == "out":
            cfg.out = value
        elif key == "reference":
            if value not in ("compute", "load"):
                raise ConfigError(f"{source}:{ln}: reference must be compute or load")
            cfg.reference = value
        elif key in ("reference_budget", "max_iter"):
            setattr(cfg, key, _convert(key, int, value, ln))
        elif key in ("tol_objective", "tol_gap"):
            setattr(cfg, key, None if value == "none" else _convert(key, float, value, ln))
        elif key in PROBLEM_KEYS[kind]:
            cfg.problem[key] = _convert(key, PROBLEM_KEYS[kind][key], value, ln)
        elif "." in key:
            solver, fld = key.split(".", 1)
            if solver not in solvers:
                raise ConfigError(f"{source}:{ln}: override for solver {solver!r} not in solver list")
            if fld not in SOLVER_KEYS:
                raise ConfigError(f"{source}:{ln}: unknown solver field {fld!r}")
            cfg.overrides.setdefault(solver, {})[fld] = _convert(key, SOLVER_KEYS[fld], value, ln)
        else:
            raise ConfigError(f"{source}:{ln}: unknown key {key!r} for kind {kind}")
    image = cfg.problem.get("image")
    if image is not None:
        path = Path(image)
        if not path.is_absolute() and source not in ("<string>", ""):
            path = Path(source).parent / path
        if not path.exists():
            raise ConfigError(f"{source}: image file {image!r} does not exist")
        cfg.problem["image"] = str(path)
    return cfg


def parse_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


# ------------------------------------------------------------------ reference cache

def cache_dir():
    d = os.environ.get("GRPDAL_CACHE_DIR")
    return Path(d) if d else Path.home() / ".cache" / "grpdal"


def cache_key(kind, params, seed):
    blob = json.dumps({"kind": kind, "params": params, "seed": seed, "v": SCHEMA_VERSION},
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def _image_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest() if path else None


def _reference(kind, params, seed, compute, policy):
    """Load ``{name: array}`` from the cache or compute and store it."""
    key_params = dict(params)
    if kind == "tv-deblur":
        key_params["image"] = _image_digest(params.get("image"))
    key = cache_key(kind, key_params, seed)
    path = cache_dir() / f"{kind}-{key}.npz"
    if path.exists():
        log.info("reference cache hit: %s", path)
        with np.load(path) as data:
            return {k: data[k] for k in data.files}
    if policy == "load":
        raise ConfigError(f"reference policy is 'load' but {path} does not exist")
    log.info("reference cache miss: computing %s reference (seed %d)", kind, seed)
    ref = compute()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".{os.getpid()}.tmp.npz")
    np.savez(tmp, **ref)
    os.replace(tmp, path)
    return ref


# ------------------------------------------------------------------ instances

@dataclass
class Cell:
    """One (instance, seed) of an experiment with default solver configs."""

    problem: object
    defaults: dict
    instance: object = None
    x0: np.ndarray = None
    y0: np.ndarray = None


def build_cell(cfg, seed):
    kind, pp = cfg.kind, cfg.problem
    if kind == "lasso":
        inst = gen_sparse_recovery(pp["n"], pp["p"], pp["s"], pp["zeta"], seed, pp["noise"])
        gamma = pp["gamma"]
        ref = _reference(kind, pp, seed,
                         lambda: {"x": lasso_reference(inst, gamma, cfg.reference_budget)},
                         cfg.reference)
        pb = lasso_with_reference(inst, gamma, ref["x"])
        y0 = inst.A @ np.zeros(inst.p) + inst.b
        nA = float(np.linalg.norm(inst.A, 2))
        n, p = inst.n, inst.p
        block_S = Metric(np.full(p, 2.0 / 0.99))
        block_T = Metric(np.full(n, 0.5))
        defaults = {
            "pda": dict(tau0=1.0 / (10 * nA), sigma=0.99 * 10 / nA),
            "grpdal": {}, "pdal": {},
            "ip-grpdal": dict(S=block_S, T=block_T, eps=ErrorSchedule.power(1.0, 2.0)),
            "ip-grpdal-accel-partial": dict(beta=1.0, S=block_S, T=block_T),
        }
        return Cell(pb, defaults, inst, None, y0)
    if kind == "tv-deblur":
        clean = read_pgm(pp["image"]) if pp["image"] else phantom(pp["size"])
        inst = gen_tv_deblur(clean, pp["nu"], pp["kappa1"], pp["density"], seed, pp["window"])

        def compute():
            x, F = tv_reference(inst)
            return {"x": x, "F": np.array(F)}
        ref = _reference(kind, pp, seed, compute, cfg.reference)
        F_star = float(ref["F"])
        pb = replace(tv_l1_saddle(inst), objective_star=F_star)
        N = inst.clean.size
        S = Metric(np.full(N, 2.0 / 0.99))
        # v lives in the unit ball but enters the coupling scaled by kappa2
        T = Metric.blocks([(N, 0.5), (2 * N, inst.kappa2)])
        defaults = {"ip-grpdal": dict(S=S, T=T, beta=1.0, tau0=0.1, mu=0.1,
                                      delta=ErrorSchedule.power(1.0, 2.0))}
        return Cell(pb, defaults, inst, inst.observed.ravel().copy(), None)
    if kind == "synthetic-strongly-convex":
        pb = quadratic_saddle(pp["dim"], seed, pp["gamma_f"], pp["gamma_g"])
        S = Metric(np.full(pp["dim"], 1.01))
        T = Metric(np.full(pp["dim"], 1.01))
        tau = 0.02 * S.Lam
        beta, rho = compute_strongly_convex_params(pp["gamma_f"], pp["gamma_g"], S.Lam, T.Lam, tau)
        defaults = {
            "ip-grpdal-accel-full": dict(S=S, T=T, tau0=tau, beta=beta,
                                         delta=ErrorSchedule.geometric(1.0, rho / 2),
                                         eps=ErrorSchedule.geometric(1.0, rho / 2)),
            "ip-grpdal-accel-partial": dict(S=S, T=T, beta=1.0),
            "ip-grpdal": dict(S=S, T=T),
            "pda": dict(tau0=0.99 / operator_norm_in_metric(pb.A), sigma=0.99 / operator_norm_in_metric(pb.A)),
        }
        return Cell(pb, defaults, None, None, None)
    raise ConfigError(f"unknown kind {kind!r}")


def _metric_from_text(text, dim):
    try:
        return Metric(np.full(dim, float(text)))
    except ValueError:
        raise ConfigError(f"metric must be a positive scalar, got {text!r}") from None


def solver_config(cfg, cell, solver, seed):
    kw = dict(max_iter=cfg.max_iter, seed=seed, track_gap=cell.problem.reference is not None)
    if cfg.kind == "tv-deblur":
        kw["tol_objective"] = cfg.problem["tol_relative"] * cell.problem.objective_star
        kw["check_floor"] = False
    elif cfg.tol_gap is not None:
        kw["tol_gap"] = cfg.tol_gap
    else:
        kw["tol_objective"] = cfg.tol_objective
    if cfg.kind == "synthetic-strongly-convex":
        kw.pop("tol_objective", None)
    kw.update(cell.defaults.get(solver, {}))
    for k, v in cfg.overrides.get(solver, {}).items():
        if k == "S":
            v = _metric_from_text(v, cell.problem.A.in_dim)
        elif k == "T":
            v = _metric_from_text(v, cell.problem.A.out_dim)
        kw[k] = v
    try:
        return SolverConfig(**kw)
    except InvalidArgument as exc:
        raise ConfigError(f"solver {solver}: {exc}") from None


# ------------------------------------------------------------------ output

def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))
    return str(v)


def report_csv(report, timing=True):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        row = [report.solver] + [r[c] for c in CSV_COLUMNS[1:-1]]
        row.append(r["elapsed"] if timing else 0.0)
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_csv_rows(path):
    """Parse an emitted CSV back into dicts (ints for counters, floats otherwise)."""
    ints = {"k", "trials", "inner_primal", "inner_dual"}
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames) != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected CSV header {rd.fieldnames}")
        return [{k: (v if k == "solver" else int(v) if k in ints else float(v))
                 for k, v in row.items()} for row in rd]


def run_experiment(cfg, out=None, seeds=None, timing=True):
    """Run every (seed, solver) cell; returns ``(exit_status, summary)``."""
    out = Path(out or cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    seeds = cfg.seeds if seeds is None else seeds
    summary = {"kind": cfg.kind, "schema": SCHEMA_VERSION, "problem": cfg.problem,
               "seeds": seeds, "runs": []}
    failed = False
    for seed in seeds:
        cell = build_cell(cfg, seed)
        for name in cfg.solvers:
            scfg = solver_config(cfg, cell, name, seed)
            t0 = time.perf_counter()
            try:
                report = SOLVERS[name](cell.problem, scfg, x0=cell.x0, y0=cell.y0)
            except (GRPDALError, InexactSolveFailed) as exc:
                failed = True
                log.error("%s (seed %d) failed: %s", name, seed, exc)
                summary["runs"].append({"solver": name, "seed": seed, "status": "error",
                                        "message": str(exc)})
                continue
            if report.status == "inexact-solve-failed":
                failed = True
            stem = f"{cfg.kind}_seed{seed}_{name}"
            (out / f"{stem}.csv").write_text(report_csv(report, timing))
            entry = {"seed": seed, **report.summary()}
            if timing:
                entry["wall_time"] = time.perf_counter() - t0
            if cfg.kind == "tv-deblur":
                h, w = cell.instance.shape
                img = out / f"{stem}.pgm"
                write_pgm(img, np.clip(report.x, 0, 1).reshape(h, w))
                entry["image"] = img.name
                entry["relative_residual"] = relative_residual(cell.instance, report.x,
                                                               cell.problem.objective_star)
            summary["runs"].append(entry)
            log.info("%s seed %d: %s after %d iterations", name, seed, report.status,
                     report.iterations)
        if cfg.kind == "tv-deblur":
            h, w = cell.instance.shape
            write_pgm(out / f"{cfg.kind}_seed{seed}_observed.pgm", cell.instance.observed)
    summary["aggregate"] = _aggregate(summary["runs"], cfg.solvers)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json))
    return (2 if failed else 0), summary


def _json(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _aggregate(runs, solvers):
    agg = {}
    for name in solvers:
        its = [r["iterations"] for r in runs if r.get("solver") == name and "iterations" in r]
        if its:
            agg[name] = {"iterations_mean": float(np.mean(its)),
                         "iterations_std": float(np.std(its)), "runs": len(its)}
    return agg


def compute_references(cfg, seeds=None):
    """Populate the reference cache for every seed; returns the cache paths' count."""
    for seed in (cfg.seeds if seeds is None else seeds):
        build_cell(cfg, seed)
    return len(cfg.seeds if seeds is None else seeds)
