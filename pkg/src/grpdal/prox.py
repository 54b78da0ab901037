"""Exact and certified inexact extended proximal operators.

A point ``z`` is a type-2 approximation of ``Prox_{tau h}^D(y)`` with
precision ``eps`` when ``p = D(y - z)/tau`` lies in the eps-subdifferential of
``h`` at ``z``. By Fenchel-Young this holds iff

    h(z) + h^*(p) - <p, z> <= eps,

which is what :func:`certify_type2` evaluates.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (CertificateFailed, InexactSolveFailed, InvalidArgument,
                     UnsupportedFunction)
from .functions import AnalysisL1
from .linops import Metric, operator_norm_in_metric

DEFAULT_MAX_INNER = 10000
# absolute slack relative to the size of the terms entering a gap
ROUNDOFF = 1e-12


@dataclass(frozen=True)
class ProxRequest:
    """Evaluate ``argmin h(x) + ||x - anchor||_D^2 / (2 tau)`` to precision ``eps``."""

    h: object
    anchor: np.ndarray
    tau: float
    metric: Optional[Metric] = None
    eps: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidArgument(f"prox stepsize must be positive, got {self.tau}")
        if not self.eps >= 0:
            raise InvalidArgument(f"precision must be nonnegative, got {self.eps}")
        anchor = np.asarray(self.anchor, dtype=float)
        if anchor.shape != (self.h.dim,):
            raise InvalidArgument("anchor dimension does not match the function")
        if self.metric is not None and self.metric.dim != self.h.dim:
            raise InvalidArgument("metric dimension does not match the function")
        object.__setattr__(self, "anchor", anchor)

    @property
    def d(self):
        return np.ones(self.h.dim) if self.metric is None else self.metric.diagonal

    def objective(self, z):
        """``J_y(z)``."""
        r = z - self.anchor
        return self.h.value(z) + float(np.dot(r, self.d * r)) / (2.0 * self.tau)


@dataclass
class ProxCertificate:
    kind: str
    gap: float
    eps: float
    success: bool
    witness: Optional[np.ndarray] = None
    dual_witness: Optional[np.ndarray] = None
    iterations: int = 0


def _accept(gap, eps, scale=1.0):
    return gap <= eps + ROUNDOFF * scale


def prox_exact(req):
    if not req.h.has_prox:
        raise UnsupportedFunction(f"{req.h.kind} has no closed-form proximal operator")
    return req.h.prox(req.anchor, req.tau, req.metric)


def fenchel_gap(h, z, p, dual=None, hz=None):
    """``h(z) + h^*(p) - <p, z>``; ``math.inf`` when ``z`` or ``p`` is outside the domain.

    ``hz`` may pass a precomputed ``h(z)``.
    """
    hz = h.value(z) if hz is None else hz
    if math.isinf(hz):
        return math.inf
    if isinstance(h, AnalysisL1):
        if dual is None:
            return math.inf
        hs = h.conjugate_with_witness(p, dual)
    else:
        hs = h.conjugate(p)
    if math.isinf(hs):
        return math.inf
    return hz + hs - float(np.dot(p, z))


def type2_witness(req, z):
    return req.d * (req.anchor - z) / req.tau


def _type2(req, z, dual=None):
    p = type2_witness(req, z)
    hz = req.h.value(z)
    g = fenchel_gap(req.h, z, p, dual, hz)
    scale = 1.0 + abs(hz) + abs(float(np.dot(p, z))) if math.isfinite(g) else 1.0
    return ProxCertificate("type-2", g, req.eps, math.isfinite(g) and _accept(g, req.eps, scale),
                           witness=p, dual_witness=dual)


def certify_type2(req, z, dual=None):
    """Type-2 certificate of ``z``; raises :class:`CertificateFailed` on an infinite gap."""
    cert = _type2(req, np.asarray(z, dtype=float), dual)
    if math.isinf(cert.gap):
        raise CertificateFailed("witness is outside the domain of the conjugate", cert)
    return cert


def certify_type0(req, z):
    """``||z - zhat||_D^2 / (2 tau) <= eps`` against the exact proximum ``zhat``."""
    r = np.asarray(z, dtype=float) - prox_exact(req)
    g = float(np.dot(r, req.d * r)) / (2.0 * req.tau)
    return ProxCertificate("type-0", g, req.eps, _accept(g, req.eps, 1.0 + req.eps))


def certify_type1(req, z):
    """``J_y(z) - min J_y <= eps``, equivalent to ``0 in d_eps J_y(z)``."""
    Jz = req.objective(np.asarray(z, dtype=float))
    Jmin = req.objective(prox_exact(req))
    g = Jz - Jmin
    return ProxCertificate("type-1", g, req.eps, _accept(g, req.eps, 1.0 + abs(Jz)))


def prox_inexact(req, warm_start=None, smooth_grad=None, lipschitz=None, nonsmooth_prox=None,
                 warm_dual=None, max_iter=DEFAULT_MAX_INNER):
    """Certified inexact prox by warm-started inner proximal-gradient iterations.

    The inner problem ``J_y = smooth + nonsmooth`` is given by ``smooth_grad``
    (with Lipschitz constant ``lipschitz``) and ``nonsmooth_prox(v, step)``.
    Without them the split is chosen from the descriptor: the metric term is
    the smooth part and ``h`` is handled by its own prox, while
    :class:`AnalysisL1` is solved by projected gradient on its dual.

    The starting point and every inner iterate are certified; the first with
    type-2 gap ``<= eps`` is returned together with its certificate, so a warm
    start that is already accurate enough costs zero inner iterations.
    ``eps == 0`` requires a closed form.
    """
    if req.eps == 0:
        if not req.h.has_prox:
            raise UnsupportedFunction(f"eps = 0 needs a closed-form prox; {req.h.kind} has none")
        z = prox_exact(req)
        cert = _type2(req, z)
        cert.success = True
        return z, cert
    if isinstance(req.h, AnalysisL1) and smooth_grad is None:
        return _dual_projected_gradient(req, warm_dual, max_iter)

    d, tau = req.d, req.tau
    if smooth_grad is None:
        if not req.h.has_prox:
            raise UnsupportedFunction(f"{req.h.kind}: supply smooth_grad/nonsmooth_prox")
        def smooth_grad(x):
            return d * (x - req.anchor) / tau
        lipschitz = float(d.max()) / tau
        def nonsmooth_prox(v, step):
            return req.h.prox(v, step)
    elif lipschitz is None or not lipschitz > 0:
        raise InvalidArgument("a positive Lipschitz constant is required with smooth_grad")
    if nonsmooth_prox is None:
        def nonsmooth_prox(v, step):
            return v

    z = req.anchor.copy() if warm_start is None else np.array(warm_start, dtype=float)
    cert = _type2(req, z)
    if cert.success:
        return z, cert
    step = 1.0 / lipschitz
    best = cert.gap
    for j in range(1, max_iter + 1):
        z = nonsmooth_prox(z - step * smooth_grad(z), step)
        cert = _type2(req, z)
        best = min(best, cert.gap)
        if cert.success:
            cert.iterations = j
            return z, cert
    raise InexactSolveFailed(f"no type-2 certificate with eps={req.eps:g} after {max_iter} "
                             f"inner iterations (best gap {best:.3e})", best, max_iter)


_norm_cache = {}


def _squared_norm(B):
    key = id(B)
    if key not in _norm_cache:
        if B.kind == "forward-difference-gradient":
            val = 8.0  # ||D||^2 <= 8 for 2-D forward differences
        else:
            val = 1.01 * operator_norm_in_metric(B, None, iters=200) ** 2
        _norm_cache[key] = (B, val)
    return _norm_cache[key][1]


def _dual_projected_gradient(req, warm_dual, max_iter):
    """Solve ``min zeta||Bx||_1 + ||x - a||_D^2/(2 tau)`` through its dual.

    With ``x(q) = a - tau D^{-1} B^* q`` the dual is a smooth problem over
    the box ``||q||_inf <= zeta`` with gradient ``-B x(q)``; it is solved by
    accelerated projected gradient, certifying every iterate.
    """
    h, a, tau, d = req.h, req.anchor, req.tau, req.d
    B, zeta = h.operator, h.weight
    q = np.zeros(B.out_dim) if warm_dual is None else np.clip(warm_dual, -zeta, zeta)
    z = a - tau * B.adjoint(q) / d
    cert = _type2(req, z, dual=q)
    if cert.success:
        return z, cert
    step = float(d.min()) / (tau * _squared_norm(B))
    best = cert.gap
    q_prev, t = q, 1.0
    for j in range(1, max_iter + 1):
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        v = q + ((t - 1.0) / t_next) * (q - q_prev)
        q_prev, t = q, t_next
        q = np.clip(v + step * B.apply(a - tau * B.adjoint(v) / d), -zeta, zeta)
        z = a - tau * B.adjoint(q) / d
        cert = _type2(req, z, dual=q)
        best = min(best, cert.gap)
        if cert.success:
            cert.iterations = j
            return z, cert
    raise InexactSolveFailed(f"dual inner solver did not reach eps={req.eps:g} "
                             f"(best gap {best:.3e})", best, max_iter)
