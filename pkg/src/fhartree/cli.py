"""fhartree command line: evolve, groundstate, alpha-sweep, meanfield, dichotomy, verify."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from scipy import linalg

from . import spectral as sp
from .checks import run_checks
from .dynamics import evolve
from .errors import (CapacityError, CheckpointError, ConfigError, ConvergenceError,
                     PropagationError, StepSizeError, VerificationError)
from .ground_state import gradient_flow_minimize, petviashvili_solve
from .io import COMMANDS, emit_tables, parse_config, write_checkpoint
from .many_body import NumericalError
from .studies import SweepSpec, alpha_sweep, coupled_focusing, dichotomy_study, n_sweep

log = logging.getLogger("fhartree")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4


def _initial(cfg):
    f = sp.gaussian(cfg.grid(), cfg.options.get("width", 1.0))
    return f.with_values(f.values.astype(complex))


def cmd_evolve(cfg, out: Path) -> bool:
    p = cfg.params()
    orders = cfg.options.get("sobolev_orders")
    traj = evolve(_initial(cfg), p, cfg.horizon, stride=cfg.options.get("stride", 10),
                  sobolev_orders=tuple(orders) if orders is not None else None,
                  blowup_factor=cfg.options.get("blowup_factor"))
    m, E = traj.column("mass"), traj.column("E")
    extra = {"config": cfg.to_dict(),
             "mass_drift": float(np.max(np.abs(m - m[0]))),
             "energy_drift": float(np.max(np.abs(E - E[0])) / max(abs(E[0]), 1e-300))}
    emit_tables(traj, out, "evolve", extra)
    if cfg.options.get("checkpoint", True):
        t, f = traj.fields[-1]
        write_checkpoint(f, out / "final.fhrt", time=t, meta={"command": "evolve"})
    return True


def cmd_groundstate(cfg, out: Path) -> bool:
    grid = cfg.grid()
    solver = cfg.options.get("solver", "petviashvili")
    kw = dict(omega=cfg.options.get("omega", 1.0))
    if "tol" in cfg.options:
        kw["tol"] = cfg.options["tol"]
    if "max_iter" in cfg.options:
        kw["max_iter"] = cfg.options["max_iter"]
    if solver == "petviashvili":
        gs = petviashvili_solve(cfg.gamma, cfg.sigma, grid, **kw)
    elif solver == "gradient_flow":
        gs = gradient_flow_minimize(cfg.gamma, cfg.sigma, grid, lam=cfg.lam, **kw)
    else:
        raise ConfigError(f"key 'solver': {solver!r} not in ('petviashvili', 'gradient_flow')")
    rows = [{"iteration": i, "residual": r} for i, r in enumerate(gs.history)]
    emit_tables({"columns": ["iteration", "residual"], "rows": rows,
                 "summary": {**gs.metadata(), "iterations": gs.iterations, "solver": solver,
                             "config": cfg.to_dict()}}, out, "groundstate")
    write_checkpoint(gs.profile, out / "Q.fhrt", meta=gs.metadata())
    return True


def _spec(cfg, kind, **options):
    return SweepSpec(kind, cfg.params(), tuple(cfg.values), cfg.horizon, cfg.grid(), cfg.seed,
                     {**cfg.options, **options})


def _study(result, out, name, cfg) -> bool:
    emit_tables(result, out, name, {"config": cfg.to_dict()})
    for k, v in result.passed.items():
        print(f"{name}: {k}: {'PASS' if v else 'FAIL'}")
    return all(result.passed.values())


def cmd_alpha_sweep(cfg, out):
    return _study(alpha_sweep(_spec(cfg, "alpha_sweep")), out, "alpha_sweep", cfg)


def cmd_meanfield(cfg, out):
    if cfg.options.get("coupled"):
        return _study(coupled_focusing(_spec(cfg, "coupled_focusing")), out, "coupled_focusing", cfg)
    return _study(n_sweep(_spec(cfg, "n_sweep")), out, "n_sweep", cfg)


def cmd_dichotomy(cfg, out):
    return _study(dichotomy_study(_spec(cfg, "dichotomy")), out, "dichotomy", cfg)


def cmd_verify(cfg, out):
    results = run_checks(seed=cfg.seed, quick=cfg.options.get("quick", True))
    rows = [r._asdict() for r in results]
    emit_tables({"columns": ["name", "passed", "value", "tol"], "rows": rows,
                 "summary": {"failed": [r.name for r in results if not r.passed]}}, out, "verify")
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  value={r.value:.3e}  tol={r.tol:g}")
    if not all(r.passed for r in results):
        raise VerificationError(", ".join(r.name for r in results if not r.passed))
    return True


HANDLERS = {"evolve": cmd_evolve, "groundstate": cmd_groundstate, "alpha-sweep": cmd_alpha_sweep,
            "meanfield": cmd_meanfield, "dichotomy": cmd_dichotomy, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fhartree", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON run configuration")
        s.add_argument("--out", type=Path, help="output directory (must not contain earlier outputs)")
        s.add_argument("--threads", type=int, help="FFT worker threads")
        s.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else None
        cfg = parse_config(text, args.command, threads=args.threads, seed=args.seed,
                           out=str(args.out) if args.out else None)
        out = Path(cfg.out or f"runs/{args.command}")
        out.mkdir(parents=True, exist_ok=True)
        sp.set_threads(cfg.threads)
        ok = HANDLERS[args.command](cfg, out)
    except (ConfigError, CapacityError, FileExistsError, CheckpointError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, PropagationError, StepSizeError, NumericalError,
            linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK if ok else EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
