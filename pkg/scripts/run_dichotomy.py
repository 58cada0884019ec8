"""Blow-up flags on squeezed ground-state data below and above the critical coupling."""
import argparse

from fhartree.dynamics import HartreeParams
from fhartree.io import emit_tables
from fhartree.spectral import Grid
from fhartree.studies import SweepSpec, dichotomy_study

ap = argparse.ArgumentParser()
ap.add_argument("--out", default="runs/dichotomy")
ap.add_argument("--ratios", type=float, nargs="+", default=[0.5, 0.9, 1.1, 1.5])
ap.add_argument("--points", type=int, default=48)
ap.add_argument("--omega", type=float, default=2.0)
args = ap.parse_args()

spec = SweepSpec("dichotomy", HartreeParams(1.0, 0.5, -1, 1.0, dt=2e-3), tuple(args.ratios), 2.0,
                 Grid(3, args.points, 12.0), options={"omega": args.omega})
res = dichotomy_study(spec)
emit_tables(res, args.out, "dichotomy")
for r in res.records:
    print(f"mu {r['mu']:+d}  lambda/lambda_c {r['lambda_ratio']:g}  flag {r['flag']}  "
          f"max growth {r['max_growth']:.2f}")
