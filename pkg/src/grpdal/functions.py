"""Prox-describable convex functions.

Every function knows its value, its Fenchel conjugate and, when one exists,
the closed-form extended proximal operator

    Prox_{tau h}^D(y) = argmin_x  h(x) + ||x - y||_D^2 / (2 tau)

for a diagonal metric ``D = diag(d)``. Values outside the effective domain
are ``math.inf``.
"""

import math

import numpy as np

from .errors import InvalidArgument, UnsupportedFunction
from .linops import Metric

# relative slack when testing membership of a box / ball, absorbs roundoff
DOMAIN_RTOL = 1e-12


def _diag(metric, n):
    if metric is None:
        return np.ones(n)
    d = metric.diagonal if isinstance(metric, Metric) else np.asarray(metric, dtype=float)
    if d.shape != (n,):
        raise InvalidArgument(f"metric of size {d.size} used with a function on R^{n}")
    return d


class ConvexFunction:
    """Base descriptor. ``gamma`` is the strong convexity modulus (>= 0)."""

    kind = "abstract"
    has_prox = False
    gamma = 0.0

    def __init__(self, dim):
        self.dim = int(dim)

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        raise NotImplementedError

    def conjugate(self, p):
        raise UnsupportedFunction(f"{self.kind}: conjugate has no closed form")

    def prox(self, y, tau, metric=None):
        raise UnsupportedFunction(f"{self.kind}: no closed-form proximal operator")

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class L1Norm(ConvexFunction):
    """``zeta ||x||_1 + (gamma/2) ||x||^2``."""

    kind = "scaled-l1"
    has_prox = True

    def __init__(self, dim, weight=1.0, gamma=0.0):
        super().__init__(dim)
        if weight < 0 or gamma < 0:
            raise InvalidArgument("weight and gamma must be nonnegative")
        self.weight = float(weight)
        self.gamma = float(gamma)

    def value(self, x):
        return self.weight * float(np.abs(x).sum()) + 0.5 * self.gamma * float(np.dot(x, x))

    def conjugate(self, p):
        excess = np.abs(p) - self.weight
        if self.gamma > 0:
            return float(np.sum(np.maximum(excess, 0.0) ** 2)) / (2.0 * self.gamma)
        if np.all(excess <= DOMAIN_RTOL * max(self.weight, 1.0)):
            return 0.0
        return math.inf

    def prox(self, y, tau, metric=None):
        d = _diag(metric, self.dim)
        v = d * y
        return np.sign(v) * np.maximum(np.abs(v) - tau * self.weight, 0.0) / (d + tau * self.gamma)


class QuadraticLinear(ConvexFunction):
    """``(c/2) ||x||^2 + <b, x>``, strongly convex with modulus ``c``."""

    kind = "quadratic-plus-linear"
    has_prox = True

    def __init__(self, dim, shift=None, scale=1.0):
        super().__init__(dim)
        if scale <= 0:
            raise InvalidArgument("quadratic scale must be positive")
        self.shift = np.zeros(dim) if shift is None else np.array(shift, dtype=float)
        if self.shift.shape != (dim,):
            raise InvalidArgument("shift has the wrong dimension")
        self.scale = float(scale)
        self.gamma = self.scale

    def value(self, x):
        return 0.5 * self.scale * float(np.dot(x, x)) + float(np.dot(self.shift, x))

    def conjugate(self, p):
        r = p - self.shift
        return float(np.dot(r, r)) / (2.0 * self.scale)

    def prox(self, y, tau, metric=None):
        d = _diag(metric, self.dim)
        return (d * y - tau * self.shift) / (d + tau * self.scale)


class BoxIndicator(ConvexFunction):
    """Indicator of ``{u : ||u||_inf <= radius}`` plus a linear term ``<f, u>``."""

    kind = "indicator-inf-ball"
    has_prox = True

    def __init__(self, dim, radius=1.0, linear=None):
        super().__init__(dim)
        if radius <= 0:
            raise InvalidArgument("radius must be positive")
        self.radius = float(radius)
        self.linear = np.zeros(dim) if linear is None else np.array(linear, dtype=float)
        if self.linear.shape != (dim,):
            raise InvalidArgument("linear term has the wrong dimension")

    def contains(self, u):
        return bool(np.all(np.abs(u) <= self.radius * (1.0 + DOMAIN_RTOL)))

    def value(self, u):
        if not self.contains(u):
            return math.inf
        return float(np.dot(self.linear, u))

    def conjugate(self, p):
        return self.radius * float(np.abs(p - self.linear).sum())

    def prox(self, y, tau, metric=None):
        d = _diag(metric, self.dim)
        return np.clip(y - tau * self.linear / d, -self.radius, self.radius)


class Separable(ConvexFunction):
    """Sum of functions acting on consecutive blocks of coordinates."""

    kind = "separable-block"

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise InvalidArgument("separable function needs at least one block")
        super().__init__(sum(p.dim for p in parts))
        self.parts = parts
        self.offsets = np.cumsum([0] + [p.dim for p in parts])
        self.has_prox = all(p.has_prox for p in parts)
        self.gamma = min(p.gamma for p in parts)

    def _blocks(self, v):
        return [v[lo:hi] for lo, hi in zip(self.offsets[:-1], self.offsets[1:])]

    def value(self, x):
        return sum(p.value(b) for p, b in zip(self.parts, self._blocks(x)))

    def conjugate(self, p):
        return sum(f.conjugate(b) for f, b in zip(self.parts, self._blocks(p)))

    def prox(self, y, tau, metric=None):
        d = _diag(metric, self.dim)
        return np.concatenate([
            f.prox(yb, tau, db) for f, yb, db in zip(self.parts, self._blocks(y), self._blocks(d))
        ])


class AnalysisL1(ConvexFunction):
    """``zeta ||B x||_1`` for a linear operator ``B`` (e.g. anisotropic TV).

    Neither the prox nor the conjugate has a closed form. The conjugate is the
    indicator of ``B^* C_zeta``; membership is certified by a dual witness
    ``q`` with ``||q||_inf <= zeta`` and ``B^* q = p``.
    """

    kind = "analysis-l1"

    # tolerance on ||B^* q - p|| relative to ||p||, for witnesses built in floating point
    WITNESS_RTOL = 1e-9

    def __init__(self, operator, weight=1.0):
        super().__init__(operator.in_dim)
        if weight <= 0:
            raise InvalidArgument("weight must be positive")
        self.operator = operator
        self.weight = float(weight)

    def value(self, x):
        return self.weight * float(np.abs(self.operator.apply(x)).sum())

    def conjugate_with_witness(self, p, q):
        if np.any(np.abs(q) > self.weight * (1.0 + DOMAIN_RTOL)):
            return math.inf
        r = self.operator.adjoint(q) - p
        if np.linalg.norm(r) > self.WITNESS_RTOL * (1.0 + np.linalg.norm(p)):
            return math.inf
        return 0.0

    def conjugate(self, p):
        if not np.any(p):
            return 0.0
        raise UnsupportedFunction("analysis-l1 conjugate needs a dual witness")
