"""Golden-ratio primal-dual solvers with dual linesearch and inexact proxes.

``ip_grpdal`` runs the convex method, ``ip_grpdal_accelerated_partial`` the
O(1/N^2) variant for strongly convex ``f`` and
``ip_grpdal_accelerated_full`` the linearly convergent variant when ``f`` and
``g`` are both strongly convex. ``pda_baseline``, ``pdal_baseline`` and
``grpdal_baseline`` are the comparison methods.
"""

import logging
import math
import time
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .errors import InexactSolveFailed, InternalError, InvalidArgument, PreconditionViolation
from .linops import Metric, operator_norm_in_metric
from .prox import ProxRequest, prox_inexact
from .saddle import ErgodicAverage, gap

log = logging.getLogger(__name__)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def _plastic_root(tol=1e-15):
    """Real root of ``xi^3 - xi - 1 = 0`` by bisection."""
    lo, hi = 1.0, 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid ** 3 - mid - 1.0 > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


XI = _plastic_root()


def psi_of(phi):
    return (1.0 + phi) / phi ** 2


@dataclass(frozen=True)
class ErrorSchedule:
    """Tolerance sequence: ``c / k**alpha`` (power), ``c * q**k`` (geometric) or zero."""

    kind: str = "zero"
    c: float = 1.0
    alpha: float = 2.0
    q: float = 0.5

    def __post_init__(self):
        if self.kind not in ("zero", "power", "geometric"):
            raise InvalidArgument(f"unknown error schedule {self.kind!r}")
        if self.kind != "zero" and not self.c > 0:
            raise InvalidArgument("schedule constant must be positive")
        if self.kind == "power" and not self.alpha > 0:
            raise InvalidArgument("power schedule needs alpha > 0")
        if self.kind == "geometric" and not 0 < self.q < 1:
            raise InvalidArgument("geometric schedule needs q in (0, 1)")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def power(cls, c=1.0, alpha=2.0):
        return cls("power", c=c, alpha=alpha)

    @classmethod
    def geometric(cls, c=1.0, q=0.5):
        return cls("geometric", c=c, q=q)

    @classmethod
    def parse(cls, text):
        """``zero`` | ``power:c:alpha`` | ``geometric:c:q``."""
        parts = text.strip().split(":")
        if parts[0] == "zero":
            return cls.zero()
        if parts[0] == "power" and len(parts) == 3:
            return cls.power(float(parts[1]), float(parts[2]))
        if parts[0] == "geometric" and len(parts) == 3:
            return cls.geometric(float(parts[1]), float(parts[2]))
        raise InvalidArgument(f"cannot parse error schedule {text!r}")

    def __str__(self):
        if self.kind == "power":
            return f"power:{self.c:g}:{self.alpha:g}"
        if self.kind == "geometric":
            return f"geometric:{self.c:g}:{self.q:g}"
        return "zero"

    def __call__(self, k):
        if self.kind == "power":
            return self.c / k ** self.alpha
        if self.kind == "geometric":
            return self.c * self.q ** k
        return 0.0


@dataclass(frozen=True)
class SolverConfig:
    """Algorithmic parameters shared by all solvers.

    ``S`` and ``T`` are the primal and dual metrics (identity when ``None``).
    ``tau0=None`` draws the initial stepsize from a perturbed dual point.
    ``sigma`` is only used by the PDA baseline. ``L`` overrides the estimate of
    ``sup ||A^*y|| / ||y||_T`` used for the stepsize floor diagnostic.
    """

    phi: float = 1.618
    eta: float = 0.99
    mu: float = 0.7
    beta: float = 100.0
    tau0: Optional[float] = None
    sigma: Optional[float] = None
    delta: ErrorSchedule = ErrorSchedule.zero()
    eps: ErrorSchedule = ErrorSchedule.zero()
    max_iter: int = 10000
    tol_objective: Optional[float] = None
    tol_gap: Optional[float] = None
    S: Optional[Metric] = None
    T: Optional[Metric] = None
    trial: str = "aggressive"
    seed: int = 0
    L: Optional[float] = None
    check_floor: bool = True
    track_gap: bool = True
    max_trials: int = 200
    inner_max_iter: int = 10000
    keep_certificates: bool = False
    inner_start: str = "warm"

    def __post_init__(self):
        if not 1.0 < self.phi < GOLDEN:
            raise InvalidArgument(f"phi must lie in (1, {GOLDEN:.6f}), got {self.phi}")
        if not 0.0 < self.eta < 1.0:
            raise InvalidArgument("eta must lie in (0, 1)")
        if not 0.0 < self.mu < 1.0:
            raise InvalidArgument("mu must lie in (0, 1)")
        if not self.beta > 0:
            raise InvalidArgument("beta must be positive")
        if self.tau0 is not None and not self.tau0 > 0:
            raise InvalidArgument("tau0 must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise InvalidArgument("sigma must be positive")
        if self.trial not in ("aggressive", "conservative"):
            raise InvalidArgument("trial must be 'aggressive' or 'conservative'")
        if self.inner_start not in ("warm", "anchor"):
            raise InvalidArgument("inner_start must be 'warm' or 'anchor'")
        if self.max_iter < 1:
            raise InvalidArgument("max_iter must be >= 1")

    @property
    def psi(self):
        return psi_of(self.phi)

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass
class SolverState:
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    Aty: np.ndarray
    tau: float
    beta: float
    k: int = 0
    qx: Optional[np.ndarray] = None  # dual warm start of an analysis-l1 primal prox


ROW_FIELDS = ("k", "objective", "P", "D", "G", "ergodic_G", "tau", "beta", "trials",
              "inner_primal", "inner_dual", "delta", "eps", "lyapunov", "elapsed")


@dataclass
class RunReport:
    solver: str
    rows: list = field(default_factory=list)
    status: str = "budget-exhausted"
    message: str = ""
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    ergodic: ErgodicAverage = field(default_factory=ErgodicAverage)
    tau_floor: Optional[float] = None
    floor_violations: int = 0
    linesearch_warnings: int = 0
    certificates: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def iterations(self):
        return len(self.rows)

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    @property
    def dual_evaluations(self):
        return int(sum(r["trials"] for r in self.rows))

    @property
    def extra_trials(self):
        """Linesearch trials beyond the first per iteration."""
        return self.dual_evaluations - self.iterations

    def summary(self):
        return {
            "solver": self.solver,
            "status": self.status,
            "message": self.message,
            "iterations": self.iterations,
            "dual_evaluations": self.dual_evaluations,
            "extra_trials": self.extra_trials,
            "floor_violations": self.floor_violations,
            "tau_floor": self.tau_floor,
            "sum_delta": float(sum(r["delta"] for r in self.rows)),
            "sum_eps": float(sum(r["eps"] for r in self.rows)),
            "final_objective": self.rows[-1]["objective"] if self.rows else None,
            **{k: v for k, v in self.extra.items() if isinstance(v, (int, float, str))},
        }


def golden_ratio_combination(x, z, phi):
    """``((phi - 1) x + z) / phi``."""
    if not phi > 1:
        raise InvalidArgument("phi must exceed 1")
    return ((phi - 1.0) / phi) * x + (1.0 / phi) * z


def initial_stepsize(A, y0, beta, seed=0, scale=1e-2):
    """``||y_{-1} - y0|| / (sqrt(beta) ||A^*(y_{-1} - y0)||)`` with a seeded ``y_{-1}``."""
    dy = scale * np.random.default_rng(seed).standard_normal(A.out_dim)
    den = math.sqrt(beta) * np.linalg.norm(A.adjoint(dy))
    if den == 0:
        raise InvalidArgument("A^* annihilates the perturbation; pass tau0 explicitly")
    return float(np.linalg.norm(dy) / den)


def stepsize_floor(L, phi, beta, eta):
    """``eta sqrt(phi) / (L sqrt(beta psi))``."""
    return eta * math.sqrt(phi) / (L * math.sqrt(beta * psi_of(phi)))


def lyapunov_value(z, y, problem, phi, beta, S=None, T=None):
    """``phi/(phi-1) ||z - xbar||_S^2 + ||y - ybar||_T^2 / beta``."""
    if problem.reference is None:
        raise PreconditionViolation("lyapunov_value needs a reference saddle point")
    xbar, ybar = problem.reference
    dz, dy = z - xbar, y - ybar
    s = 1.0 if S is None else S.diagonal
    t = 1.0 if T is None else T.diagonal
    return phi / (phi - 1.0) * float(np.dot(dz, s * dz)) + float(np.dot(dy, t * dy)) / beta


def compute_strongly_convex_params(gamma_f, gamma_g, Lam1, Lam2, tau):
    """``beta, rho`` balancing ``1 + gamma_f tau/Lam1 = 1 + beta gamma_g tau/Lam2 = 1/rho``."""
    for name, v in (("gamma_f", gamma_f), ("gamma_g", gamma_g), ("Lam1", Lam1),
                    ("Lam2", Lam2), ("tau", tau)):
        if not v > 0:
            raise InvalidArgument(f"{name} must be positive, got {v}")
    beta = gamma_f * Lam2 / (gamma_g * Lam1)
    rho = 1.0 / (1.0 + gamma_f * tau / Lam1)
    return beta, rho


def _metric(m, n):
    return Metric.identity(n) if m is None else m


def _init_state(problem, config, x0, y0):
    A = problem.A
    x = np.zeros(A.in_dim) if x0 is None else np.array(x0, dtype=float)
    y = np.zeros(A.out_dim) if y0 is None else np.array(y0, dtype=float)
    tau = config.tau0 if config.tau0 is not None else initial_stepsize(A, y, config.beta, config.seed)
    return SolverState(x=x, z=x.copy(), y=y, Aty=A.adjoint(y), tau=tau, beta=config.beta)


class _Tracker:
    """Per-iteration bookkeeping shared by all solvers."""

    def __init__(self, report, problem, config):
        self.report = report
        self.problem = problem
        self.config = config
        self.has_ref = problem.reference is not None and config.track_gap
        self.t0 = time.perf_counter()

    def record(self, k, x, y, tau, beta, trials, inner_p=0, inner_d=0, delta=0.0, eps=0.0,
               lyapunov=math.nan):
        pb = self.problem
        obj = pb.objective(x) if pb.objective is not None else math.nan
        P = D = Gv = eG = math.nan
        if self.has_ref:
            gv = gap(pb, x, y)
            P, D, Gv = gv.P, gv.D, gv.G
            eG = gap(pb, *self.report.ergodic.point()).G
        self.report.rows.append(dict(
            k=k, objective=obj, P=P, D=D, G=Gv, ergodic_G=eG, tau=tau, beta=beta,
            trials=trials, inner_primal=inner_p, inner_dual=inner_d, delta=delta, eps=eps,
            lyapunov=lyapunov, elapsed=time.perf_counter() - self.t0))
        return self.converged(obj, Gv)

    def converged(self, obj, Gv):
        cfg, pb = self.config, self.problem
        if cfg.tol_objective is not None and pb.objective_star is not None:
            return obj - pb.objective_star < cfg.tol_objective
        if cfg.tol_gap is not None and self.has_ref:
            return Gv <= cfg.tol_gap
        return False

    def finish(self, status, x, y, z=None, message=""):
        r = self.report
        r.status, r.message, r.x, r.y, r.z = status, message, x, y, z
        r.elapsed = time.perf_counter() - self.t0
        return r


def dual_linesearch(state, problem, config, x_new, Ax_new, tau_trial, beta_next, eta,
                    tau_floor=None, fixed=False, k=0):
    """Backtracking on ``tau_{k+1}`` until

        beta tau_{k+1} ||A^*(y+ - y)||^2 <= eta^2 (phi / tau_k) ||y+ - y||_T^2.

    Each trial recomputes only the dual prox. With ``fixed`` the trial
    stepsize is kept even if the test fails (the failure is reported).
    Returns ``(tau_next, y_next, Aty_next, certificate, trials, passed)``.
    """
    A, g = problem.A, problem.g
    T = _metric(config.T, A.out_dim)
    t = T.diagonal
    eps = config.eps(k + 1)
    tau_next = tau_trial
    trials = 0
    while True:
        trials += 1
        sigma = beta_next * tau_next
        req = ProxRequest(g, state.y + sigma * Ax_new / t, sigma, config.T, eps)
        warm = state.y if config.inner_start == "warm" else None
        y_next, cert = prox_inexact(req, warm_start=warm, max_iter=config.inner_max_iter)
        Aty_next = A.adjoint(y_next)
        dy = y_next - state.y
        dAty = Aty_next - state.Aty
        lhs = beta_next * tau_next * float(np.dot(dAty, dAty))
        rhs = eta ** 2 * config.phi / state.tau * float(np.dot(dy, t * dy))
        passed = lhs <= rhs
        if passed or fixed:
            return tau_next, y_next, Aty_next, cert, trials, passed
        tau_next *= config.mu
        if tau_floor is not None and tau_next < 1e-3 * tau_floor:
            raise InternalError(f"iteration {k + 1}: stepsize {tau_next:.3e} fell below "
                                f"1e-3 x floor {tau_floor:.3e}; check L or the operator adjoint")
        if trials >= config.max_trials:
            raise InternalError(f"iteration {k + 1}: linesearch exceeded {config.max_trials} trials")


def _validate_metrics(problem, config, min_lam1, what):
    A = problem.A
    S = _metric(config.S, A.in_dim)
    T = _metric(config.T, A.out_dim)
    if S.dim != A.in_dim or T.dim != A.out_dim:
        raise InvalidArgument("metric dimensions do not match the problem")
    if not S.lam > min_lam1:
        raise InvalidArgument(f"{what}: smallest eigenvalue of S must exceed {min_lam1:g}, "
                              f"got {S.lam:g}")
    return S, T


def _run_grpd(problem, config, mode, x0=None, y0=None):
    A, f = problem.A, problem.f
    if mode == "basic":
        S, T = _validate_metrics(problem, config, config.eta, "IP-GRPDAL")
        name = "ip-grpdal"
    else:
        if not XI < config.phi < GOLDEN:
            raise InvalidArgument(f"accelerated variants need phi in ({XI:.6f}, {GOLDEN:.6f})")
        S, T = _validate_metrics(problem, config, 1.0, "accelerated IP-GRPDAL")
        name = "ip-grpdal-accel-" + mode
    if mode in ("partial", "full") and not problem.gamma_f > 0:
        raise PreconditionViolation("f is not strongly convex (gamma_f = 0); use ip_grpdal")
    if mode == "full" and not problem.gamma_g > 0:
        raise PreconditionViolation("g is not strongly convex (gamma_g = 0)")

    phi, psi = config.phi, config.psi
    eta = config.eta if mode == "basic" else 1.0
    st = _init_state(problem, config, x0, y0)
    report = RunReport(name)
    tr = _Tracker(report, problem, config)
    s = S.diagonal

    rho = None
    if mode == "full":
        beta_bal, rho = compute_strongly_convex_params(problem.gamma_f, problem.gamma_g,
                                                       S.Lam, T.Lam, st.tau)
        if abs(beta_bal - st.beta) > 1e-9 * beta_bal:
            raise PreconditionViolation(f"beta={st.beta:g} does not balance the strong convexity "
                                        f"moduli; compute_strongly_convex_params gives {beta_bal:g}")
        report.extra["rho"] = rho

    tau_floor = None
    if mode == "basic" and config.check_floor:
        L = config.L if config.L is not None else operator_norm_in_metric(A, config.T, 200, config.seed)
        if L > 0:
            tau_floor = stepsize_floor(L, phi, config.beta, config.eta)
            report.extra["L"] = L
    report.tau_floor = tau_floor

    for k in range(config.max_iter):
        z_new = golden_ratio_combination(st.x, st.z, phi)
        delta = config.delta(k + 1)
        req = ProxRequest(f, z_new - st.tau * st.Aty / s, st.tau, config.S, delta)
        try:
            warm = config.inner_start == "warm"
            x_new, pcert = prox_inexact(req, warm_start=st.x if warm else None,
                                        warm_dual=st.qx if warm else None,
                                        max_iter=config.inner_max_iter)
        except InexactSolveFailed as exc:
            return tr.finish("inexact-solve-failed", st.x, st.y, st.z,
                             f"primal prox at iteration {k + 1}: {exc}")
        Ax_new = A.apply(x_new)

        lyap = math.nan
        if problem.reference is not None and config.track_gap:
            lyap = lyapunov_value(golden_ratio_combination(x_new, z_new, phi), st.y, problem,
                                  phi, st.beta, config.S, config.T)

        if mode == "partial":
            omega = (phi - psi) / (phi * S.Lam + psi * problem.gamma_f * st.tau)
            beta_next = st.beta * (1.0 + problem.gamma_f * omega * st.tau)
        else:
            beta_next = st.beta

        if mode == "full":
            tau_trial = st.tau
        else:
            tau_trial = psi * st.tau if config.trial == "aggressive" else st.tau
        try:
            tau_next, y_new, Aty_new, dcert, trials, passed = dual_linesearch(
                st, problem, config, x_new, Ax_new, tau_trial, beta_next, eta,
                tau_floor=tau_floor, fixed=(mode == "full"), k=k)
        except InexactSolveFailed as exc:
            return tr.finish("inexact-solve-failed", st.x, st.y, st.z,
                             f"dual prox at iteration {k + 1}: {exc}")
        if not passed:
            report.linesearch_warnings += 1
            log.warning("iteration %d: fixed stepsize fails the linesearch test", k + 1)
        if tau_floor is not None and tau_next < tau_floor:
            report.floor_violations += 1

        if config.keep_certificates:
            report.certificates.append((k + 1, "primal", req, x_new, pcert))
            report.certificates.append((k + 1, "dual", problem.g, y_new, dcert))

        if mode == "basic":
            report.ergodic.update(tau_next, x_new, y_new)
        elif mode == "partial":
            report.ergodic.update(beta_next * tau_next, x_new, y_new)
        else:
            report.ergodic.update_log(-k * math.log(rho), x_new, y_new)

        st = SolverState(x=x_new, z=z_new, y=y_new, Aty=Aty_new, tau=tau_next, beta=beta_next,
                         k=k + 1, qx=pcert.dual_witness)
        done = tr.record(k + 1, x_new, y_new, tau_next, beta_next, trials,
                         pcert.iterations, dcert.iterations, pcert.gap, dcert.gap, lyap)
        if done:
            return tr.finish("converged", st.x, st.y, st.z)
    return tr.finish("budget-exhausted", st.x, st.y, st.z)


def ip_grpdal(problem, config, x0=None, y0=None):
    """Inexact golden-ratio primal-dual method with dual linesearch."""
    return _run_grpd(problem, config, "basic", x0, y0)


def ip_grpdal_accelerated_partial(problem, config, x0=None, y0=None):
    """Accelerated variant for ``gamma_f``-strongly convex ``f``; ``beta_k`` grows like k^2."""
    return _run_grpd(problem, config, "partial", x0, y0)


def ip_grpdal_accelerated_full(problem, config, x0=None, y0=None):
    """Constant-stepsize variant for strongly convex ``f`` and ``g``; linear rate ``rho``.

    ``config.tau0`` is the constant stepsize and ``config.beta`` must come from
    :func:`compute_strongly_convex_params`.
    """
    if config.tau0 is None:
        raise PreconditionViolation("the strongly convex variant needs an explicit tau0")
    report = _run_grpd(problem, config, "full", x0, y0)
    eg = report.column("ergodic_G") if report.rows else np.array([])
    ok = np.isfinite(eg) & (eg > 0)
    if ok.sum() >= 10:
        k = report.column("k")[ok]
        half = k >= np.median(k)
        slope = np.polyfit(k[half], np.log(eg[ok][half]), 1)[0]
        report.extra["contraction"] = float(math.exp(slope))
    return report


def grpdal_baseline(problem, config, x0=None, y0=None):
    """Exact-prox golden-ratio method with linesearch."""
    cfg = config.replace(delta=ErrorSchedule.zero(), eps=ErrorSchedule.zero())
    report = ip_grpdal(problem, cfg, x0, y0)
    report.solver = "grpdal"
    return report


def pda_baseline(problem, config, x0=None, y0=None, op_norm=None):
    """Primal-dual iteration with extrapolation ``theta = 1`` and fixed steps ``tau, sigma``."""
    A, f, g = problem.A, problem.f, problem.g
    tau, sigma = config.tau0, config.sigma
    if tau is None or sigma is None:
        raise InvalidArgument("PDA needs both tau0 and sigma")
    nrm = op_norm if op_norm is not None else operator_norm_in_metric(A, None, 200, config.seed)
    if tau * sigma * nrm ** 2 >= 1.0:
        raise InvalidArgument(f"tau*sigma*||A||^2 = {tau * sigma * nrm ** 2:.4f} must be < 1")
    x = np.zeros(A.in_dim) if x0 is None else np.array(x0, dtype=float)
    y = np.zeros(A.out_dim) if y0 is None else np.array(y0, dtype=float)
    report = RunReport("pda")
    tr = _Tracker(report, problem, config)
    for k in range(config.max_iter):
        x_new = f.prox(x - tau * A.adjoint(y), tau)
        y = g.prox(y + sigma * A.apply(2.0 * x_new - x), sigma)
        x = x_new
        report.ergodic.update(1.0, x, y)
        if tr.record(k + 1, x, y, tau, 1.0, 1):
            return tr.finish("converged", x, y)
    return tr.finish("budget-exhausted", x, y)


def pdal_baseline(problem, config, x0=None, y0=None):
    """Primal-dual method with extrapolation ``theta_k = tau_k / tau_{k-1}`` and dual linesearch.

    Trial stepsizes start at ``sqrt(1 + theta) tau`` and backtrack by ``mu``
    until ``beta tau_{k+1} ||A^* dy||^2 <= eta^2 ||dy||^2 / tau_k``.
    """
    A, f, g = problem.A, problem.f, problem.g
    x = np.zeros(A.in_dim) if x0 is None else np.array(x0, dtype=float)
    y = np.zeros(A.out_dim) if y0 is None else np.array(y0, dtype=float)
    beta, eta, mu = config.beta, config.eta, config.mu
    tau = config.tau0 if config.tau0 is not None else initial_stepsize(A, y, beta, config.seed)
    theta = 1.0
    Aty = A.adjoint(y)
    report = RunReport("pdal")
    tr = _Tracker(report, problem, config)
    for k in range(config.max_iter):
        x_new = f.prox(x - tau * Aty, tau)
        tau_next = math.sqrt(1.0 + theta) * tau
        trials = 0
        while True:
            trials += 1
            th = tau_next / tau
            xbar = x_new + th * (x_new - x)
            sig = beta * tau_next
            y_new = g.prox(y + sig * A.apply(xbar), sig)
            Aty_new = A.adjoint(y_new)
            dy, dA = y_new - y, Aty_new - Aty
            if beta * tau_next * float(np.dot(dA, dA)) <= eta ** 2 / tau * float(np.dot(dy, dy)):
                break
            tau_next *= mu
            if trials >= config.max_trials:
                raise InternalError(f"PDAL iteration {k + 1}: linesearch exceeded {trials} trials")
        theta = tau_next / tau
        x, y, Aty, tau = x_new, y_new, Aty_new, tau_next
        report.ergodic.update(tau, x, y)
        if tr.record(k + 1, x, y, tau, beta, trials):
            return tr.finish("converged", x, y)
    return tr.finish("budget-exhausted", x, y)


SOLVERS = {
    "ip-grpdal": ip_grpdal,
    "grpdal": grpdal_baseline,
    "pdal": pdal_baseline,
    "pda": pda_baseline,
    "ip-grpdal-accel-partial": ip_grpdal_accelerated_partial,
    "ip-grpdal-accel-full": ip_grpdal_accelerated_full,
}

CONFIG_FIELDS = tuple(f.name for f in fields(SolverConfig))
