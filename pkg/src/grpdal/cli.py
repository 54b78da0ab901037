"""``grpdal-kit`` command line: run experiments, build reference caches, quick checks."""

import argparse
import logging
import sys
import time

import numpy as np

from .errors import ConfigError, GRPDALError

USAGE_EXIT = 1


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 (config error) instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _parser():
    p = _Parser(prog="grpdal-kit", description="Golden-ratio primal-dual experiment runner.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command")
    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config")
    run.add_argument("--seed", type=int, help="run only this seed")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.add_argument("--no-timing", action="store_true",
                     help="write zero wall times so reruns are byte-identical")
    ref = sub.add_parser("ref", help="compute and cache reference solutions")
    ref.add_argument("config")
    sub.add_parser("check", help="run a quick invariant suite")
    return p


def _check_suite():
    """Yields ``(name, passed)`` for a budgeted set of invariants."""
    from .functions import L1Norm, QuadraticLinear
    from .linops import BlurOperator, DenseOperator, GradientOperator, Metric, operator_norm_in_metric
    from .problems import gen_sparse_recovery, lasso_with_reference, quadratic_saddle
    from .prox import ProxRequest, certify_type2, prox_exact
    from .solvers import GOLDEN, XI, SolverConfig, grpdal_baseline, ip_grpdal, psi_of

    rng = np.random.default_rng(0)
    yield "psi * phi^2 == 1 + phi", abs(psi_of(1.618) * 1.618 ** 2 - 2.618) < 1e-14
    yield "psi(golden) == 1", abs(psi_of(GOLDEN) - 1.0) < 1e-14
    yield "xi^3 - xi - 1 == 0", abs(XI ** 3 - XI - 1.0) < 1e-13

    ok = True
    for op in (BlurOperator(16, 16), GradientOperator(16, 16)):
        x, y = rng.standard_normal(op.in_dim), rng.standard_normal(op.out_dim)
        ok &= abs(op.apply(x) @ y - x @ op.adjoint(y)) < 1e-10 * (1 + abs(op.apply(x) @ y))
    yield "blur/gradient adjoints", ok

    M = rng.standard_normal((30, 20))
    est = operator_norm_in_metric(DenseOperator(M))
    yield "power iteration vs SVD", abs(est - np.linalg.norm(M, 2)) < 1e-6 * np.linalg.norm(M, 2)

    ok = True
    for _ in range(200):
        h = L1Norm(5, rng.uniform(0.1, 2)) if rng.random() < 0.5 else \
            QuadraticLinear(5, rng.standard_normal(5), rng.uniform(0.1, 2))
        req = ProxRequest(h, rng.standard_normal(5), rng.uniform(0.1, 3),
                          Metric(rng.uniform(0.5, 2, 5)), 1e-10)
        ok &= certify_type2(req, prox_exact(req)).success
    yield "exact proxes pass type-2 certificates", bool(ok)

    inst = gen_sparse_recovery(30, 30, 3, 0.1, 0)
    pb = lasso_with_reference(inst)
    r = grpdal_baseline(pb, SolverConfig(max_iter=20000, tol_objective=1e-10), y0=inst.b)
    yield "GRPDAL reaches 1e-10 on a 30x30 LASSO", r.status == "converged"
    k = r.column("k")
    G = r.column("ergodic_G")
    yield "ergodic N*G bounded", bool(np.all(k[99:] * G[99:] <= 1.05 * 100 * G[99]))

    xb, yb = pb.reference
    r = ip_grpdal(pb, SolverConfig(max_iter=20), x0=xb, y0=yb)
    move = max(np.abs(r.x - xb).max(), np.abs(r.y - yb).max())
    yield "saddle point is a fixed point", move < 1e-12 * (1 + np.abs(xb).max())

    q = quadratic_saddle(20, 0)
    r = ip_grpdal(q, SolverConfig(max_iter=3000, tol_gap=1e-10))
    yield "quadratic saddle gap < 1e-10", r.status == "converged"


def cmd_check(out=sys.stdout):
    t0 = time.perf_counter()
    failures = 0
    for name, passed in _check_suite():
        failures += not passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}", file=out)
    print(f"{failures} failure(s) in {time.perf_counter() - t0:.1f}s", file=out)
    return 0 if failures == 0 else 2


def main(argv=None):
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return USAGE_EXIT
    if args.command == "check":
        return cmd_check()

    from .harness import compute_references, parse_config, run_experiment
    try:
        cfg = parse_config(args.config)
        if args.command == "ref":
            n = compute_references(cfg)
            print(f"references ready for {n} seed(s)")
            return 0
        seeds = None if args.seed is None else [args.seed]
        status, summary = run_experiment(cfg, out=args.out, seeds=seeds, timing=not args.no_timing)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except GRPDALError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    for run in summary["runs"]:
        its = run.get("iterations", "-")
        print(f"{run['solver']:>24} seed {run['seed']}: {run['status']} ({its} iterations)")
    return status


if __name__ == "__main__":
    sys.exit(main())
