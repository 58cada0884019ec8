"""Critical mass from the Petviashvili solver under grid refinement, with the gradient-flow cross-check."""
import argparse

from fhartree.ground_state import gradient_flow_minimize, petviashvili_solve
from fhartree.spectral import Grid

ap = argparse.ArgumentParser()
ap.add_argument("--points", type=int, nargs="+", default=[32, 48, 64])
ap.add_argument("--half-width", type=float, default=16.0)
ap.add_argument("--gradient-flow", action="store_true")
args = ap.parse_args()

for m in args.points:
    g = Grid(3, m, args.half_width)
    gs = petviashvili_solve(1.0, 0.5, g, tol=1e-9)
    line = f"M={m}  lambda_c={gs.critical_mass:.8f}  residual={gs.residual:.1e}  iters={gs.iterations}"
    if args.gradient_flow:
        line += f"  gradient flow={gradient_flow_minimize(1.0, 0.5, g, tol=1e-8).critical_mass:.8f}"
    print(line)
