"""alpha-convergence of the regularized flow; optional Gaussian width scan."""
import argparse
import json

from fhartree.dynamics import HartreeParams
from fhartree.spectral import Grid
from fhartree.studies import SweepSpec, alpha_sweep

ap = argparse.ArgumentParser()
ap.add_argument("--points", type=int, default=32)
ap.add_argument("--half-width", type=float, default=8.0)
ap.add_argument("--horizon", type=float, default=0.5)
ap.add_argument("--widths", type=float, nargs="+", default=[1.0])
args = ap.parse_args()

for w in args.widths:
    spec = SweepSpec("alpha_sweep", HartreeParams(1.0, 0.5, 1, 1.0, dt=0.01),
                     (0.4, 0.2, 0.1, 0.05), args.horizon, Grid(3, args.points, args.half_width),
                     options={"width": w})
    res = alpha_sweep(spec)
    print(json.dumps({"width": w, "records": res.records,
                      "slopes": {k: f.slope for k, f in res.fits.items()}, "passed": res.passed}))
