import math

import numpy as np
import pytest

from grpdal import (DenseOperator, InvalidArgument, Metric, PreconditionViolation,
                    QuadraticLinear, SaddleProblem, SolverConfig, compute_strongly_convex_params,
                    gap, golden_ratio_combination, grpdal_baseline, ip_grpdal,
                    ip_grpdal_accelerated_full, ip_grpdal_accelerated_partial, lyapunov_value,
                    pda_baseline, pdal_baseline)
from grpdal.problems import gen_sparse_recovery, lasso_with_reference, quadratic_saddle
from grpdal.solvers import GOLDEN, XI, ErrorSchedule, psi_of


@pytest.fixture(scope="module")
def small_lasso():
    inst = gen_sparse_recovery(30, 30, 3, 0.1, 0)
    return inst, lasso_with_reference(inst)


def test_psi_identity():
    for phi in (1.1, 1.4, 1.618, GOLDEN - 1e-9):
        assert abs(psi_of(phi) * phi ** 2 - (1 + phi)) < 1e-14
    assert abs(psi_of(GOLDEN) - 1.0) < 1e-14


def test_plastic_number():
    assert abs(XI ** 3 - XI - 1) < 1e-13
    assert 1.3247 < XI < 1.3248


def test_golden_combination_values():
    p = np.array([1.5, -2.0])
    assert np.allclose(golden_ratio_combination(p, p, 1.618), p)
    assert golden_ratio_combination(1.0, 0.0, 1.618) == pytest.approx(0.618 / 1.618, abs=1e-15)
    assert golden_ratio_combination(1.0, 0.0, GOLDEN) == pytest.approx(2 - GOLDEN, abs=1e-15)
    x, z = np.array([3.0, 1.0]), np.array([-1.0, 2.0])
    zn = golden_ratio_combination(x, z, 1.5)
    assert np.allclose(x - zn, (x - z) / 1.5)
    with pytest.raises(InvalidArgument):
        golden_ratio_combination(x, z, 1.0)


@pytest.mark.parametrize("kw", [dict(phi=1.0), dict(phi=GOLDEN), dict(eta=1.0), dict(mu=0.0),
                                dict(beta=-1.0), dict(tau0=0.0), dict(trial="wild"),
                                dict(max_iter=0)])
def test_config_rejects_out_of_range(kw):
    with pytest.raises(InvalidArgument):
        SolverConfig(**kw)


def test_error_schedules():
    assert ErrorSchedule.parse("power:2:0.5")(4) == pytest.approx(1.0)
    assert ErrorSchedule.parse("geometric:1:0.5")(3) == pytest.approx(0.125)
    assert ErrorSchedule.parse("zero")(10) == 0.0
    for bad in ("power:1", "geometric:1:1.5", "cubic:1:2", "power:-1:2"):
        with pytest.raises(InvalidArgument):
            ErrorSchedule.parse(bad)


def test_strongly_convex_params():
    assert compute_strongly_convex_params(1.3, 1.3, 2.0, 2.0, 0.1)[0] == pytest.approx(1.0)
    assert compute_strongly_convex_params(1.0, 1.0, 1.0, 1.0, 1.0)[1] == pytest.approx(0.5)
    beta, rho = compute_strongly_convex_params(2.0, 1.0, 1.0, 1.0, 1.0)
    assert beta == pytest.approx(2.0) and rho == pytest.approx(1 / 3)
    gf, gg, L1, L2, tau = 0.7, 2.3, 1.4, 3.1, 0.05
    beta, rho = compute_strongly_convex_params(gf, gg, L1, L2, tau)
    assert abs(1 / (1 + beta * gg * tau / L2) - rho) < 1e-12
    with pytest.raises(InvalidArgument):
        compute_strongly_convex_params(0.0, 1.0, 1.0, 1.0, 1.0)


def _decoupled(dim=4):
    f = QuadraticLinear(dim, None, 1.0)
    g = QuadraticLinear(dim, None, 1.0)
    A = DenseOperator(np.zeros((dim, dim)))
    pb = SaddleProblem(f, g, A, objective=lambda x: 0.5 * float(x @ x))
    return pb.with_reference(np.zeros(dim), np.zeros(dim), 0.0)


def test_decoupled_quadratic_converges():
    pb = _decoupled()
    x0 = np.array([1.0, -2.0, 0.5, 3.0])
    r = ip_grpdal(pb, SolverConfig(max_iter=200, tau0=1.0), x0=x0, y0=x0.copy())
    assert r.column("G")[-1] <= 1e-10
    # scalar recursion oracle for the primal component
    phi, tau, x, z = 1.618, 1.0, 1.0, 1.0
    for _ in range(5):
        z = ((phi - 1) * x + z) / phi
        x = z / (1 + tau)
        tau *= psi_of(phi)
    r5 = ip_grpdal(pb, SolverConfig(max_iter=5, tau0=1.0), x0=x0, y0=x0.copy())
    assert r5.x[0] == pytest.approx(x, rel=1e-12)
    assert r5.rows[-1]["tau"] == pytest.approx(tau, rel=1e-12)


def test_decoupled_pda_converges():
    pb = _decoupled()
    x0 = np.ones(4)
    r = pda_baseline(pb, SolverConfig(max_iter=200, tau0=1.0, sigma=1.0), x0=x0, y0=x0, op_norm=0.0)
    assert r.column("G")[-1] <= 1e-10


def test_pda_guard(small_lasso):
    _, pb = small_lasso
    nA = np.linalg.norm(pb.A.matrix, 2)
    cfg = SolverConfig(max_iter=3, tau0=1.0 / nA, sigma=0.99 / nA)
    pda_baseline(pb, cfg, op_norm=nA)
    with pytest.raises(InvalidArgument):
        pda_baseline(pb, cfg.replace(sigma=1.01 / nA), op_norm=nA)


def test_saddle_point_is_fixed(small_lasso):
    _, pb = small_lasso
    xb, yb = pb.reference
    for solver in (ip_grpdal, grpdal_baseline, pdal_baseline):
        r = solver(pb, SolverConfig(max_iter=30), x0=xb, y0=yb)
        assert np.abs(r.x - xb).max() < 1e-12 * (1 + np.abs(xb).max())
        assert np.abs(r.y - yb).max() < 1e-12 * (1 + np.abs(yb).max())


def test_deterministic(small_lasso):
    _, pb = small_lasso
    cfg = SolverConfig(max_iter=300, seed=3, eps=ErrorSchedule.power(1, 2))
    a, b = ip_grpdal(pb, cfg), ip_grpdal(pb, cfg)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "elapsed"} for r in rows]
    assert strip(a.rows) == strip(b.rows)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)


def test_baseline_equals_zero_schedule(small_lasso):
    _, pb = small_lasso
    cfg = SolverConfig(max_iter=400)
    a = grpdal_baseline(pb, cfg)
    b = ip_grpdal(pb, cfg)
    assert np.abs(a.x - b.x).max() <= 1e-12
    assert np.allclose(a.column("tau"), b.column("tau"), rtol=1e-12, atol=0)


def test_trials_bounded(small_lasso):
    _, pb = small_lasso
    cfg = SolverConfig(max_iter=1000)
    r = grpdal_baseline(pb, cfg)
    bound = 1 + math.log(cfg.psi) / math.log(1 / cfg.mu)
    # every trial after the first was a failed test at tau >= tau_k, so trials are
    # bounded by the floor ratio; the geometric bound holds for most iterations
    t = r.column("trials")
    assert t.min() >= 1 and t.max() <= cfg.max_trials
    assert np.mean(t <= math.ceil(bound) + 1) > 0.5


def test_grpdal_reaches_tolerance(small_lasso):
    _, pb = small_lasso
    r = grpdal_baseline(pb, SolverConfig(max_iter=20000, tol_objective=1e-10))
    assert r.status == "converged"
    assert r.rows[-1]["objective"] - pb.objective_star < 1e-10


def test_rows_dense_from_one(small_lasso):
    _, pb = small_lasso
    r = ip_grpdal(pb, SolverConfig(max_iter=50, eps=ErrorSchedule.power(1, 2)))
    assert [row["k"] for row in r.rows] == list(range(1, 51))
    assert all(row["eps"] <= ErrorSchedule.power(1, 2)(row["k"]) + 1e-12 for row in r.rows)


def test_lyapunov_value_basics(small_lasso):
    _, pb = small_lasso
    xb, yb = pb.reference
    assert lyapunov_value(xb, yb, pb, 1.618, 10.0) == 0.0
    d = np.random.default_rng(0).standard_normal(xb.size)
    v1 = lyapunov_value(xb + d, yb, pb, 1.618, 10.0)
    v2 = lyapunov_value(xb + 2 * d, yb, pb, 1.618, 10.0)
    assert v2 == pytest.approx(4 * v1, rel=1e-12)
    inst = gen_sparse_recovery(5, 5, 1, 0.1, 0)
    from grpdal.problems import lasso_saddle
    with pytest.raises(PreconditionViolation):
        lyapunov_value(np.zeros(5), np.zeros(5), lasso_saddle(inst), 1.618, 1.0)


def test_metric_gates(small_lasso):
    _, pb = small_lasso
    with pytest.raises(InvalidArgument):
        ip_grpdal(pb, SolverConfig(max_iter=2, S=Metric(np.full(30, 0.5))))
    inst = gen_sparse_recovery(30, 30, 3, 0.1, 0)
    pbg = lasso_with_reference(inst, gamma=1.0)
    with pytest.raises(InvalidArgument):
        ip_grpdal_accelerated_partial(pbg, SolverConfig(max_iter=2))  # S = I is not > 1
    with pytest.raises(InvalidArgument):
        ip_grpdal_accelerated_partial(pbg, SolverConfig(max_iter=2, phi=1.3,
                                                        S=Metric(np.full(30, 1.1))))


def test_strong_convexity_preconditions(small_lasso):
    _, pb = small_lasso
    S = Metric(np.full(30, 1.1))
    with pytest.raises(PreconditionViolation):
        ip_grpdal_accelerated_partial(pb, SolverConfig(max_iter=2, S=S))
    q = quadratic_saddle(10, 0)
    with pytest.raises(PreconditionViolation):
        ip_grpdal_accelerated_full(q, SolverConfig(max_iter=2, S=Metric(np.full(10, 1.1)),
                                                   T=Metric(np.full(10, 1.1))))
    with pytest.raises(PreconditionViolation):  # unbalanced beta
        ip_grpdal_accelerated_full(q, SolverConfig(max_iter=2, tau0=0.01, beta=3.0,
                                                   S=Metric(np.full(10, 1.1)),
                                                   T=Metric(np.full(10, 1.1))))


def test_accelerated_partial_beta_grows():
    inst = gen_sparse_recovery(30, 30, 3, 0.1, 0)
    pb = lasso_with_reference(inst, gamma=1.0)
    r = ip_grpdal_accelerated_partial(pb, SolverConfig(max_iter=200, beta=1.0,
                                                       S=Metric(np.full(30, 1.01))))
    b = r.column("beta")
    assert np.all(np.diff(b) > 0)
    assert b[-1] > 100 * b[0]


def test_accelerated_partial_small_gamma_limit():
    inst = gen_sparse_recovery(20, 20, 2, 0.1, 0)
    pb = lasso_with_reference(inst, gamma=1e-12)
    r = ip_grpdal_accelerated_partial(pb, SolverConfig(max_iter=50, beta=1.0,
                                                       S=Metric(np.full(20, 1.01))))
    assert np.allclose(r.column("beta"), 1.0, rtol=1e-9)


def test_accelerated_full_contracts():
    q = quadratic_saddle(20, 0)
    S = T = Metric(np.full(20, 1.01))
    tau = 0.02 * S.Lam
    beta, rho = compute_strongly_convex_params(1.0, 1.0, S.Lam, T.Lam, tau)
    r = ip_grpdal_accelerated_full(q, SolverConfig(max_iter=400, tau0=tau, beta=beta, S=S, T=T))
    assert r.extra["rho"] == pytest.approx(rho)
    assert np.all(r.column("tau") == tau)
    assert 0 < r.extra["contraction"] < 1
    assert r.column("ergodic_G")[-1] < 1e-2 * r.column("ergodic_G")[0]


def test_pdal_converges(small_lasso):
    _, pb = small_lasso
    r = pdal_baseline(pb, SolverConfig(max_iter=20000, tol_objective=1e-10))
    assert r.status == "converged"


def test_gap_tracking_matches_gap(small_lasso):
    _, pb = small_lasso
    r = ip_grpdal(pb, SolverConfig(max_iter=20))
    assert r.rows[-1]["G"] == pytest.approx(gap(pb, r.x, r.y).G, rel=1e-12, abs=1e-14)
