"""What a type-2 certificate is, on a one-dimensional example and on TV.

A point z approximates prox_{tau h}(a) in the type-2 sense when
p = d (a - z) / tau is an eps-subgradient of h at z. The library certifies
this through the Fenchel-Young gap h(z) + h*(p) - <p, z>, which is
nonnegative and vanishes exactly at the true proximal point.
"""

import numpy as np

from grpdal import AnalysisL1, L1Norm, Metric, ProxRequest, certify_type2, prox_inexact
from grpdal.linops import GradientOperator

h = L1Norm(1)
req = ProxRequest(h, np.array([3.0]), 1.0, None, 1.25)
for z in (2.0, 2.5, 3.0):
    c = certify_type2(req, np.array([z]))
    print(f"z = {z}: gap {c.gap:.3f}  accepted at eps=1.25: {c.success}")

# The prox of kappa ||D x||_1 has no closed form. The inner solver runs
# accelerated projected gradient on its dual and stops at the first iterate
# whose gap is below eps; the dual iterate q doubles as the witness for h*.
rng = np.random.default_rng(0)
D = GradientOperator(32, 32)
h = AnalysisL1(D, 0.05)
anchor = rng.random(32 * 32)
for eps in (1e-1, 1e-3, 1e-6):
    req = ProxRequest(h, anchor, 0.5, Metric(np.full(32 * 32, 2 / 0.99)), eps)
    z, cert = prox_inexact(req)
    print(f"eps {eps:g}: {cert.iterations:4d} inner iterations, gap {cert.gap:.2e}")
