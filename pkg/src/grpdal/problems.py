"""Benchmark instances: l1-regularized sparse recovery and TV-L1 deblurring.

Also a fully strongly convex quadratic saddle with a closed-form solution,
used to observe linear rates.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import InternalError, InvalidArgument
from .functions import AnalysisL1, BoxIndicator, L1Norm, QuadraticLinear, Separable
from .linops import BlurOperator, DenseOperator, GradientOperator, StackOperator
from .saddle import SaddleProblem

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- sparse recovery

@dataclass
class SparseRecoveryInstance:
    A: np.ndarray
    omega: np.ndarray
    b: np.ndarray
    zeta: float
    seed: int
    noise: float = 0.1

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.A.shape[1]

    @property
    def s(self):
        return int(np.count_nonzero(self.omega))


def gen_sparse_recovery(n, p, s, zeta=0.1, seed=0, noise=0.1):
    """``A = randn(n, p)/sqrt(n)``, ``s``-sparse ``omega`` with entries U[-10, 10], ``b = A omega + noise``."""
    if n < 1 or p < 1:
        raise InvalidArgument("n and p must be positive")
    if not 0 < s <= p:
        raise InvalidArgument(f"need 0 < s <= p, got s={s}, p={p}")
    if zeta < 0 or noise < 0:
        raise InvalidArgument("zeta and noise must be nonnegative")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, p)) / math.sqrt(n)
    omega = np.zeros(p)
    support = rng.choice(p, size=s, replace=False)
    vals = rng.uniform(-10.0, 10.0, size=s)
    vals[vals == 0.0] = 10.0  # keep exactly s nonzeros
    omega[support] = vals
    b = A @ omega + noise * rng.standard_normal(n)
    return SparseRecoveryInstance(A, omega, b, float(zeta), seed, noise)


def lasso_objective(inst, x, gamma=0.0):
    r = inst.A @ x - inst.b
    return 0.5 * float(r @ r) + inst.zeta * float(np.abs(x).sum()) + 0.5 * gamma * float(x @ x)


def lasso_saddle(inst, gamma=0.0):
    """``f = zeta||x||_1 (+ gamma/2 ||x||^2)``, ``g = ||y||^2/2 + <b, y>``; optimal ``y = Ax - b``."""
    f = L1Norm(inst.p, inst.zeta, gamma)
    g = QuadraticLinear(inst.n, inst.b, 1.0)
    name = "lasso" if gamma == 0 else f"lasso-gamma{gamma:g}"
    return SaddleProblem(f, g, DenseOperator(inst.A), objective=lambda x: lasso_objective(inst, x, gamma),
                         name=name)


def lasso_kkt_residual(A, b, zeta, x, gamma=0.0):
    """Distance of ``-grad`` of the smooth part to ``zeta * subdiff ||x||_1``."""
    g = A.T @ (A @ x - b) + gamma * x
    on = x != 0
    r_on = g[on] + zeta * np.sign(x[on])
    r_off = np.maximum(np.abs(g[~on]) - zeta, 0.0)
    return float(math.sqrt(r_on @ r_on + r_off @ r_off))


def _fista(A, b, zeta, gamma, iters, tol=1e-13):
    L = np.linalg.norm(A, 2) ** 2 + gamma
    x = np.zeros(A.shape[1])
    v, t = x.copy(), 1.0
    for _ in range(iters):
        g = A.T @ (A @ v - b) + gamma * v
        w = v - g / L
        x_new = np.sign(w) * np.maximum(np.abs(w) - zeta / L, 0.0)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        v = x_new + (t - 1.0) / t_new * (x_new - x)
        if np.linalg.norm(x_new - x) <= tol * (1.0 + np.linalg.norm(x)):
            x = x_new
            break
        x, t = x_new, t_new
    return x


def _polish(A, b, zeta, gamma, x):
    """Solve the KKT system on the support and sign pattern of ``x``."""
    sup = np.flatnonzero(np.abs(x) > 1e-9 * max(1.0, np.abs(x).max()))
    if sup.size == 0:
        return np.zeros_like(x)
    As = A[:, sup]
    M = As.T @ As + gamma * np.eye(sup.size)
    xs = np.linalg.lstsq(M, As.T @ b - zeta * np.sign(x[sup]), rcond=None)[0]
    out = np.zeros_like(x)
    out[sup] = xs
    return out


def lasso_reference(inst, gamma=0.0, iters=200000):
    """High-accuracy minimizer by FISTA followed by a support/sign KKT solve.

    The polished point is kept only if it lowers the KKT residual.
    """
    A, b, zeta = inst.A, inst.b, inst.zeta
    x = _fista(A, b, zeta, gamma, iters)
    xp = _polish(A, b, zeta, gamma, x)
    if lasso_kkt_residual(A, b, zeta, xp, gamma) < lasso_kkt_residual(A, b, zeta, x, gamma):
        x = xp
    return x


def lasso_with_reference(inst, gamma=0.0, xbar=None):
    """LASSO saddle problem with ``(xbar, A xbar - b)`` and ``Phi*`` installed."""
    pb = lasso_saddle(inst, gamma)
    if xbar is None:
        xbar = lasso_reference(inst, gamma)
    ybar = inst.A @ xbar - inst.b
    return pb.with_reference(xbar, ybar, lasso_objective(inst, xbar, gamma), tol=1e-7)


# ---------------------------------------------------------------- quadratic saddle

def quadratic_saddle(dim=50, seed=0, gamma_f=1.0, gamma_g=1.0, m=None):
    """``f = (gamma_f/2)||x||^2 + <a,x>``, ``g = (gamma_g/2)||y||^2 + <b,y>``, random coupling.

    The saddle point solves ``(gamma_f I + A^T A / gamma_g) x = A^T b / gamma_g - a``.
    """
    m = dim if m is None else m
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, dim)) / math.sqrt(m)
    a = rng.standard_normal(dim)
    b = rng.standard_normal(m)
    f = QuadraticLinear(dim, a, gamma_f)
    g = QuadraticLinear(m, b, gamma_g)
    xbar = np.linalg.solve(gamma_f * np.eye(dim) + A.T @ A / gamma_g, A.T @ b / gamma_g - a)
    ybar = (A @ xbar - b) / gamma_g

    def objective(x):
        r = A @ x - b
        return 0.5 * gamma_f * float(x @ x) + float(a @ x) + float(r @ r) / (2.0 * gamma_g)

    pb = SaddleProblem(f, g, DenseOperator(A), objective=objective, name="quadratic")
    return pb.with_reference(xbar, ybar, objective(xbar), tol=1e-9)


# ---------------------------------------------------------------- TV-L1 deblurring

def make_gradient_operator(h, w):
    return GradientOperator(h, w)


def make_blur_operator(h, w, window=9):
    return BlurOperator(h, w, window)


def salt_pepper(image, density, seed=0):
    """Corrupt each pixel with probability ``density``: half to 0, half to 1."""
    if not 0.0 <= density <= 1.0:
        raise InvalidArgument("density must lie in [0, 1]")
    img = np.array(image, dtype=float)
    rng = np.random.default_rng(seed)
    hit = rng.random(img.shape) < density
    salt = rng.random(img.shape) < 0.5
    img[hit] = np.where(salt[hit], 1.0, 0.0)
    return img


def phantom(size=64):
    """Piecewise-constant test image in [0, 1]: background, square, disk and bar."""
    if size < 8:
        raise InvalidArgument("phantom needs size >= 8")
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.full((size, size), 0.1)
    img[(xx > 0.15) & (xx < 0.45) & (yy > 0.15) & (yy < 0.45)] = 0.8
    img[(xx - 0.65) ** 2 + (yy - 0.6) ** 2 < 0.2 ** 2] = 0.5
    img[(xx > 0.2) & (xx < 0.85) & (yy > 0.78) & (yy < 0.86)] = 1.0
    img[(xx - 0.65) ** 2 + (yy - 0.6) ** 2 < 0.07 ** 2] = 0.0
    return img


@dataclass
class TVDeblurInstance:
    clean: np.ndarray
    observed: np.ndarray
    K: BlurOperator
    D: GradientOperator
    nu: float = 0.1
    kappa1: float = 0.05
    kappa2: float = 0.05
    seed: int = 0
    density: float = 0.2
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.kappa1 > 0 and self.kappa2 > 0):
            raise InvalidArgument("kappa1 and kappa2 must be positive")
        if abs(self.kappa1 + self.kappa2 - self.nu) > 1e-12 * max(1.0, self.nu):
            raise InvalidArgument("kappa1 + kappa2 must equal nu")

    @property
    def shape(self):
        return self.clean.shape


def gen_tv_deblur(clean=None, nu=0.1, kappa1=None, density=0.2, seed=0, window=9):
    """Blur ``clean`` with a ``window``-box average and add salt-and-pepper noise."""
    clean = phantom(64) if clean is None else np.asarray(clean, dtype=float)
    if clean.ndim != 2:
        raise InvalidArgument("image must be 2-D")
    if not nu > 0:
        raise InvalidArgument("nu must be positive")
    h, w = clean.shape
    K = make_blur_operator(h, w, window)
    D = make_gradient_operator(h, w)
    k1 = nu / 2.0 if kappa1 is None else float(kappa1)
    k2 = nu - k1
    observed = salt_pepper(K.apply(clean.ravel()).reshape(h, w), density, seed)
    return TVDeblurInstance(clean, observed, K, D, nu, k1, k2, seed, density)


def tv_objective(inst, x):
    """``||Kx - f||_1 + nu ||Dx||_1``."""
    x = np.asarray(x, dtype=float).ravel()
    return (float(np.abs(inst.K.apply(x) - inst.observed.ravel()).sum())
            + inst.nu * float(np.abs(inst.D.apply(x)).sum()))


def relative_residual(inst, x, F_star):
    if not F_star > 0:
        raise InvalidArgument("F_star must be positive")
    return (tv_objective(inst, x) - F_star) / F_star


def tv_l1_saddle(inst):
    """Primal ``kappa1 ||D.||_1`` (inexact prox), dual ``(u, v)`` in unit inf-balls plus ``<f, u>``.

    The coupling is ``(K; kappa2 D)``, so maximizing over ``v`` in the unit
    ball returns ``kappa2 ||Dx||_1`` and the saddle value in ``y`` is ``F(x)``.
    """
    N = inst.clean.size
    A = StackOperator([(1.0, inst.K), (inst.kappa2, inst.D)])
    f = AnalysisL1(inst.D, inst.kappa1)
    g = Separable([BoxIndicator(N, 1.0, inst.observed.ravel()),
                   BoxIndicator(2 * N, 1.0)])
    return SaddleProblem(f, g, A, objective=lambda x: tv_objective(inst, x), name="tv-l1")


def _sparse_rows(op_matrix_1d_h, op_matrix_1d_w):
    return sparse.kron(sparse.csr_matrix(op_matrix_1d_h), sparse.csr_matrix(op_matrix_1d_w), "csr")


def _sparse_gradient(h, w):
    def diff(n):
        d = sparse.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n), format="lil")
        d[n - 1, n - 1] = 0.0
        return d.tocsr()
    Dv = sparse.kron(diff(h), sparse.identity(w), "csr")
    Dh = sparse.kron(sparse.identity(h), diff(w), "csr")
    return sparse.vstack([Dv, Dh], "csr")


def tv_reference(inst):
    """Exact minimizer of the TV-L1 objective as a linear program (HiGHS interior point).

    Variables ``(x, t, s)`` with ``|Kx - f| <= t`` and ``|Dx| <= s``,
    minimizing ``sum t + nu sum s``.
    """
    h, w = inst.shape
    N = h * w
    K = _sparse_rows(inst.K._Bh, inst.K._Bw)
    D = _sparse_gradient(h, w)
    M = D.shape[0]
    fobs = inst.observed.ravel()
    I_N, I_M = sparse.identity(N, format="csr"), sparse.identity(M, format="csr")
    Z_NM, Z_MN = sparse.csr_matrix((N, M)), sparse.csr_matrix((M, N))
    A_ub = sparse.vstack([
        sparse.hstack([K, -I_N, Z_NM]),
        sparse.hstack([-K, -I_N, Z_NM]),
        sparse.hstack([D, Z_MN, -I_M]),
        sparse.hstack([-D, Z_MN, -I_M]),
    ], "csc")
    b_ub = np.concatenate([fobs, -fobs, np.zeros(2 * M)])
    c = np.concatenate([np.zeros(N), np.ones(N), inst.nu * np.ones(M)])
    bounds = [(None, None)] * N + [(0, None)] * (N + M)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs-ipm")
    if res.status != 0:
        raise InternalError(f"TV-L1 reference LP failed: {res.message}")
    x = res.x[:N]
    return x, tv_objective(inst, x)
