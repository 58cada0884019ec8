"""Pickl functional and reduced-density distances against N (1D exact many-body)."""
import argparse

from fhartree.dynamics import HartreeParams
from fhartree.io import emit_tables
from fhartree.spectral import Grid
from fhartree.studies import SweepSpec, coupled_focusing, n_sweep

ap = argparse.ArgumentParser()
ap.add_argument("--out", default="runs/meanfield")
ap.add_argument("--N", type=int, nargs="+", default=[2, 3, 4, 5])
ap.add_argument("--mu", type=int, default=1)
ap.add_argument("--lam", type=float, default=1.0)
ap.add_argument("--coupled", action="store_true", help="alpha_N = alpha0 N^(-3/4)")
args = ap.parse_args()

spec = SweepSpec("coupled_focusing" if args.coupled else "n_sweep",
                 HartreeParams(1.0, 1.0, args.mu, args.lam, alpha=0.5, dt=0.02),
                 tuple(args.N), 1.0, Grid(1, 32, 8.0), options={"sample_every": 5})
res = (coupled_focusing if args.coupled else n_sweep)(spec)
emit_tables(res, args.out, spec.kind)
for k, f in res.fits.items():
    print(f"{k}: slope {f.slope:.3f}")
print(res.passed)
