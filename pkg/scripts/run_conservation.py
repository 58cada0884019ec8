"""Mass and energy drift of the defocusing split-step flow under dt halving."""
import argparse

import numpy as np

from fhartree import spectral as sp
from fhartree.dynamics import HartreeParams, evolve
from fhartree.spectral import Grid

ap = argparse.ArgumentParser()
ap.add_argument("--points", type=int, default=48)
ap.add_argument("--dt", type=float, nargs="+", default=[4e-3, 2e-3, 1e-3])
args = ap.parse_args()

g = Grid(3, args.points, 12.0)
phi0 = sp.gaussian(g, 1.5)
phi0 = phi0.with_values(phi0.values.astype(complex))
for dt in args.dt:
    tr = evolve(phi0, HartreeParams(1.0, 0.5, 1, 1.0, dt=dt), 1.0, stride=100)
    m, E = tr.column("mass"), tr.column("E")
    print(f"dt={dt:g}  mass drift={np.max(np.abs(m - m[0])):.2e}  "
          f"energy drift={abs(E[-1] - E[0]) / abs(E[0]):.3e}")
