"""Four primal-dual methods on one sparse recovery problem.

Builds a (100, 100, 10) instance, solves it to high accuracy for a reference,
then races PDA, PDAL, GRPDAL and IP-GRPDAL to an objective residual of 1e-10
using the parameter choices the harness uses by default.
"""

import logging

import numpy as np

from grpdal.harness import build_cell, parse_config_text, solver_config
from grpdal.solvers import SOLVERS

logging.basicConfig(level=logging.WARNING)

cfg = parse_config_text("""
kind = lasso
solvers = pda, pdal, grpdal, ip-grpdal
n = 100
p = 100
s = 10
""")
cell = build_cell(cfg, seed=0)
print(f"Phi* = {cell.problem.objective_star:.10f}")

# Each solver gets its defaults: PDA fixed steps tau = 1/(10||A||),
# linesearch methods beta = 100, mu = 0.7, eta = 0.99, and IP-GRPDAL
# also the diagonal metrics and an inexact dual prox with eps_k = 1/k^2.
print(f"{'solver':>10} {'iters':>7} {'dual proxes':>12} {'final tau':>10}")
for name in cfg.solvers:
    sc = solver_config(cfg, cell, name, 0).replace(track_gap=False)
    r = SOLVERS[name](cell.problem, sc, x0=cell.x0, y0=cell.y0)
    print(f"{name:>10} {r.iterations:>7} {r.dual_evaluations:>12} {r.rows[-1]['tau']:>10.3g}")

# The golden-ratio methods can only grow tau by psi = (1 + phi)/phi^2 per step,
# which is barely above one at phi = 1.618:
print("psi at phi = 1.618:", (1 + 1.618) / 1.618 ** 2)
