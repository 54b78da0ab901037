"""Deblurring a salt-and-pepper corrupted phantom with the TV-L1 model.

The restored and observed images are written as PGM files next to this
script. A 32x32 phantom keeps the run (and the LP reference) short.
"""

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from grpdal import Metric, ip_grpdal
from grpdal.pgm import write_pgm
from grpdal.problems import gen_tv_deblur, phantom, relative_residual, tv_l1_saddle, tv_reference
from grpdal.solvers import ErrorSchedule, SolverConfig

logging.basicConfig(level=logging.WARNING)
here = Path(__file__).parent

inst = gen_tv_deblur(phantom(32), nu=0.1, density=0.2, seed=0)
x_ref, F_star = tv_reference(inst)
pb = replace(tv_l1_saddle(inst), objective_star=F_star)

N = inst.clean.size
cfg = SolverConfig(beta=1.0, tau0=0.1, mu=0.1, max_iter=6000,
                   S=Metric(np.full(N, 2 / 0.99)),
                   T=Metric.blocks([(N, 0.5), (2 * N, 0.05)]),
                   delta=ErrorSchedule.power(1.0, 2.0),
                   tol_objective=1e-3 * F_star, check_floor=False, track_gap=False)
r = ip_grpdal(pb, cfg, x0=inst.observed.ravel())
inner = r.column("inner_primal")
print(f"{r.status} after {r.iterations} iterations")
print(f"relative residual {relative_residual(inst, r.x, F_star):.2e}")
print(f"inner iterations per primal prox: mean {inner.mean():.1f}, max {inner.max():.0f}")

write_pgm(here / "tv_observed.pgm", inst.observed)
write_pgm(here / "tv_restored.pgm", np.clip(r.x, 0, 1).reshape(inst.shape))
err = lambda img: np.abs(img - inst.clean).mean()
print(f"mean abs error: observed {err(inst.observed):.3f}, restored {err(r.x.reshape(inst.shape)):.3f}")
