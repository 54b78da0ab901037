"""Saddle problems ``min_x max_y f(x) + <Ax, y> - g(y)``, gaps and ergodic averages."""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DomainViolation, InvalidArgument, PreconditionViolation


@dataclass(frozen=True)
class SaddleProblem:
    """``f`` on X, ``g`` on Y, coupling ``A: X -> Y``.

    ``reference`` is a saddle point ``(xbar, ybar)`` used for gap evaluation.
    ``objective`` is the primal objective (e.g. the LASSO value) and
    ``objective_star`` its optimal value, both optional.
    """

    f: object
    g: object
    A: object
    reference: Optional[tuple] = None
    objective: Optional[Callable] = None
    objective_star: Optional[float] = None
    name: str = "saddle"
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.f.dim != self.A.in_dim or self.g.dim != self.A.out_dim:
            raise InvalidArgument(
                f"dimension mismatch: f on R^{self.f.dim}, g on R^{self.g.dim}, "
                f"A maps R^{self.A.in_dim} -> R^{self.A.out_dim}")
        if self.reference is not None:
            xbar, ybar = (np.asarray(v, dtype=float) for v in self.reference)
            object.__setattr__(self, "reference", (xbar, ybar))

    @property
    def gamma_f(self):
        return self.f.gamma

    @property
    def gamma_g(self):
        return self.g.gamma

    def with_reference(self, xbar, ybar, objective_star=None, check=True, tol=1e-8):
        """Return a copy with a reference saddle point installed.

        With ``check`` the saddle residual is verified when both functions
        have closed-form proxes.
        """
        out = replace(self, reference=(xbar, ybar), _cache={},
                      objective_star=self.objective_star if objective_star is None else objective_star)
        if check and self.f.has_prox and self.g.has_prox:
            res = saddle_residual(out, xbar, ybar)
            if res > tol:
                raise PreconditionViolation(f"reference point has saddle residual {res:.3e} > {tol:g}")
        return out

    def lagrangian(self, x, y):
        return self.f.value(x) + float(np.dot(self.A.apply(x), y)) - self.g.value(y)

    def _ref_terms(self):
        if self.reference is None:
            raise PreconditionViolation(f"problem {self.name!r} has no reference saddle point")
        if not self._cache:
            xbar, ybar = self.reference
            self._cache.update(
                Aty=self.A.adjoint(ybar), Ax=self.A.apply(xbar),
                fbar=self.f.value(xbar), gbar=self.g.value(ybar))
        return self._cache


@dataclass(frozen=True)
class GapValue:
    P: float
    D: float

    @property
    def G(self):
        return self.P + self.D


def gap(problem, x, y):
    """Primal, dual and total gap of ``(x, y)`` w.r.t. the reference saddle point."""
    c = problem._ref_terms()
    xbar, ybar = problem.reference
    fx = problem.f.value(x)
    if math.isinf(fx):
        raise DomainViolation(f"f(x) = +inf: x violates the domain of f ({problem.f.kind})")
    gy = problem.g.value(y)
    if math.isinf(gy):
        raise DomainViolation(f"g(y) = +inf: y violates the domain of g ({problem.g.kind})")
    P = fx - c["fbar"] + float(np.dot(x - xbar, c["Aty"]))
    D = gy - c["gbar"] - float(np.dot(y - ybar, c["Ax"]))
    return GapValue(P, D)


def saddle_residual(problem, x, y):
    """Fixed-point residual ``||x - prox_f(x - A^*y)|| + ||y - prox_g(y + Ax)||``."""
    rx = x - problem.f.prox(x - problem.A.adjoint(y), 1.0)
    ry = y - problem.g.prox(y + problem.A.apply(x), 1.0)
    return float(np.linalg.norm(rx) + np.linalg.norm(ry))


class ErgodicAverage:
    """Running weighted averages of primal and dual iterates.

    Weights may be passed on a log scale so geometric weights ``rho^{-k}``
    do not overflow.
    """

    def __init__(self):
        self.count = 0
        self.log_total = -math.inf
        self.x = None
        self.y = None

    @property
    def total_weight(self):
        return math.exp(self.log_total)

    def update(self, weight, x, y):
        if not weight > 0:
            raise InvalidArgument(f"ergodic weight must be positive, got {weight}")
        return self.update_log(math.log(weight), x, y)

    def update_log(self, log_weight, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        new_total = np.logaddexp(self.log_total, log_weight)
        frac = math.exp(log_weight - new_total)
        if self.count == 0:
            self.x, self.y = x.copy(), y.copy()
        else:
            self.x = self.x + frac * (x - self.x)
            self.y = self.y + frac * (y - self.y)
        self.log_total = float(new_total)
        self.count += 1
        return self

    def point(self):
        if self.count == 0:
            raise PreconditionViolation("ergodic average is empty")
        return self.x.copy(), self.y.copy()


def ergodic_update(avg, weight, x, y):
    return avg.update(weight, x, y)


def ergodic_point(avg):
    return avg.point()
