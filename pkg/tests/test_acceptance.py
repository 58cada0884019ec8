"""Acceptance criteria; each test prints one PASS/FAIL line collected in the terminal summary."""
import json
import math
import time

import numpy as np
import pytest

from fhartree import many_body as mb
from fhartree import spectral as sp
from fhartree.checks import method_agreement, riesz_oracle_error
from fhartree.cli import main
from fhartree.dynamics import HartreeParams, evolve
from fhartree.ground_state import gradient_flow_minimize, petviashvili_solve
from fhartree.spectral import Field, Grid
from fhartree.studies import SweepSpec, alpha_sweep, dichotomy_study, n_sweep

pytestmark = pytest.mark.acceptance


def verdict(report, n, ok, detail):
    report(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_1_conservation(report):
    g = Grid(3, 48, 12.0)
    phi0 = sp.gaussian(g, 1.5)
    phi0 = phi0.with_values(phi0.values.astype(complex))
    t0 = time.perf_counter()
    drifts = []
    for dt in (2e-3, 1e-3):
        tr = evolve(phi0, HartreeParams(1.0, 0.5, 1, 1.0, dt=dt), 1.0, stride=100)
        m, E = tr.column("mass"), tr.column("E")
        drifts.append((np.max(np.abs(m - m[0])) / m[0], abs(E[-1] - E[0]) / abs(E[0])))
    runtime = time.perf_counter() - t0
    (mass, energy), (_, energy_half) = drifts
    ratio = energy / energy_half
    ok = mass < 1e-8 and energy < 1e-4 and abs(ratio - 4) <= 0.6 and runtime < 240
    verdict(report, 1, ok, f"mass drift {mass:.1e}, energy drift {energy:.1e}, "
                           f"halving ratio {ratio:.3f}, {runtime:.0f}s for both runs")


def test_2_riesz_oracle(report):
    errs = {g: riesz_oracle_error(g) for g in (0.5, 1.0, 1.4)}
    agree = method_agreement(alpha=0.1)
    ok = max(errs.values()) < 1e-3 and agree < 1e-2
    text = ", ".join(f"gamma {g:g}: {e:.1e}" for g, e in errs.items())
    verdict(report, 2, ok, f"quadrature rel. errors {text}; method difference {agree:.1e}")


def test_3_ground_state(report, ground_state_64):
    t0 = time.perf_counter()
    gs = ground_state_64
    lc = gs.critical_mass
    # at sigma = 1/2 the omega = 4 soliton is Q(4x) up to amplitude: solve it on the box L/4
    w4 = petviashvili_solve(1.0, 0.5, Grid(3, 64, 4.0), omega=4.0, tol=1e-9 * 4**2.5)
    fine = petviashvili_solve(1.0, 0.5, Grid(3, 128, 16.0), tol=1e-8)
    gf = gradient_flow_minimize(1.0, 0.5, Grid(3, 64, 16.0), tol=1e-8)
    runtime = time.perf_counter() - t0
    r_omega = abs(w4.critical_mass / lc - 1)
    r_grid = abs(fine.critical_mass / lc - 1)
    r_gf = abs(gf.critical_mass / lc - 1)
    ok = (gs.residual <= 1e-8 and fine.residual <= 1e-8 and r_omega < 1e-3 and r_grid < 1e-3
          and r_gf < 1e-2 and runtime < 300)
    verdict(report, 3, ok, f"lambda_c {lc:.6f}, residual {gs.residual:.1e}, omega rel {r_omega:.1e}, "
                           f"doubling rel {r_grid:.1e}, gradient flow rel {r_gf:.1e}, {runtime:.0f}s")


def test_4_alpha_convergence(report):
    spec = SweepSpec("alpha_sweep", HartreeParams(1.0, 0.5, 1, 1.0, dt=0.01),
                     (0.4, 0.2, 0.1, 0.05), 0.5, Grid(3, 32, 8.0), options={"eps": 1.0})
    res = alpha_sweep(spec)
    l2 = res.fits["l2"].slope if "l2" in res.fits else math.nan
    hd = res.fits["hdot"].slope if "hdot" in res.fits else math.nan
    ok = l2 >= 0.95 and hd >= 0.8
    verdict(report, 4, ok, f"L2 slope {l2:.3f} (need >= 0.95), H^(gamma/4) slope {hd:.3f} "
                           f"(need >= 0.8), {res.metadata['runtime_s']:.0f}s")


def test_5_mean_field_decay(report):
    spec = SweepSpec("n_sweep", HartreeParams(1.0, 1.0, 1, 1.0, alpha=0.5, dt=0.02),
                     (2, 3, 4, 5), 1.0, Grid(1, 32, 8.0), options={"sample_every": 5})
    res = n_sweep(spec)
    slope = res.fits["a"].slope
    ok = slope <= -0.8 and res.passed["chain"] and len(res.samples) == 4 * 11
    verdict(report, 5, ok, f"a slope {slope:.3f}, chain at {len(res.samples)} samples "
                           f"{'holds' if res.passed['chain'] else 'violated'}, "
                           f"{res.metadata['runtime_s']:.0f}s")


def test_6_interpolation_bound(report):
    g = Grid(1, 32, 8.0)
    p = HartreeParams(1.0, 1.0, 1, 1.0, alpha=0.5, dt=0.02)
    phi0 = sp.gaussian(g, 1.0)
    ref = evolve(phi0, p, 1.0, stride=5)
    worst = 0.0
    n = 0
    for (t, st), (_, f) in zip(mb.mb_evolve(mb.product_state(phi0, 3, p), 1.0, sample_every=5),
                               ref.fields):
        rho = mb.reduce_density_1(st)
        for theta in (0.0, 0.25, 0.5):
            worst = max(worst, mb.interpolation_bound_check(st, f, theta, 1.0, rho=rho)["ratio"])
            n += 1
    x = g.axis
    u = np.exp(-x**2 / 2)
    v = x * np.exp(-x**2 / 2) * (1 + 0.5j)
    phi = Field(g, (u / math.sqrt(np.sum(u**2) * g.spacing)).astype(complex))
    chi = Field(g, v / math.sqrt(np.sum(np.abs(v) ** 2) * g.spacing))
    trace, hs = mb.schatten_distances(mb.reduce_density_1(mb.two_mode_state(phi, chi, p)), phi)
    closed = max(abs(trace - 1), abs(hs - 1 / math.sqrt(2)))
    ok = worst <= 1 and closed < 1e-10
    verdict(report, 6, ok, f"max LHS/RHS {worst:.3f} over {n} checks, rank-2 error {closed:.1e}")


def test_7_focusing_dichotomy(report):
    spec = SweepSpec("dichotomy", HartreeParams(1.0, 0.5, -1, 1.0, dt=2e-3), (0.5, 1.5), 2.0,
                     Grid(3, 48, 12.0), options={"omega": 2.0})
    res = dichotomy_study(spec)
    ok = bool(res.passed) and all(res.passed.values()) and len(res.passed) == 3
    verdict(report, 7, ok, f"flags {res.flags['pattern']}, lambda_c {res.metadata['lambda_critical']:.4f}, "
                           f"{res.metadata['runtime_s']:.0f}s")


def test_8_pickl_algebra(report):
    g = Grid(1, 16, 6.0)
    p = HartreeParams(1.0, 1.0, 1, 1.0, alpha=0.5)
    x = g.axis
    u = np.exp(-x**2 / 2)
    phi = Field(g, (u / math.sqrt(np.sum(u**2) * g.spacing)).astype(complex))
    v = np.exp(-(x - 1) ** 2 / 2) * (1 + 0.3j * x)
    v = v - np.sum(phi.values.conj() * v) * g.spacing * phi.values
    chi = Field(g, v / math.sqrt(np.sum(np.abs(v) ** 2) * g.spacing))
    a_prod = abs(mb.pickl_functional(mb.product_state(phi, 3, p), phi))
    a_two = abs(mb.pickl_functional(mb.two_mode_state(phi, chi, p), phi) - 0.5)
    rng = np.random.default_rng(8)
    g8 = Grid(1, 8, 4.0)
    worst = 0.0
    for i in range(50):
        st = mb.random_symmetric_state(g8, 2 + i % 2, p, rng)
        w = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        f = Field(g8, w / math.sqrt(np.sum(np.abs(w) ** 2) * g8.spacing))
        q = f.values * math.sqrt(g8.spacing)
        other = 1 - float(np.real(q.conj() @ mb.reduce_density_1(st).matrix @ q))
        worst = max(worst, abs(mb.pickl_functional(st, f) - other))
    ok = a_prod <= 1e-12 and a_two <= 1e-10 and worst <= 1e-10
    verdict(report, 8, ok, f"product {a_prod:.1e}, two-mode {a_two:.1e}, two-path max {worst:.1e}")


def test_9_determinism(report, tmp_path):
    cfg = tmp_path / "meanfield.json"
    cfg.write_text(json.dumps({"points": 16, "half_width": 6.0, "dt": 0.05, "horizon": 0.5,
                               "values": [2, 3, 4], "sample_every": 2}))
    ev = tmp_path / "evolve.json"
    ev.write_text(json.dumps({"points": 16, "half_width": 8.0, "dt": 0.01, "horizon": 0.1}))
    outputs = []
    for run in ("a", "b"):
        codes = [main(["meanfield", "--config", str(cfg), "--seed", "3", "--threads", "1",
                       "--out", str(tmp_path / run / "mf")]),
                 main(["evolve", "--config", str(ev), "--seed", "3", "--threads", "1",
                       "--out", str(tmp_path / run / "ev")])]
        files = sorted((tmp_path / run).rglob("*.csv"))
        outputs.append((codes, [f.relative_to(tmp_path / run) for f in files],
                        [f.read_bytes() for f in files]))
    (ca, na, ba), (cb, nb, bb) = outputs
    ok = len(na) == 3 and na == nb and ba == bb and 3 not in ca + cb and 2 not in ca + cb
    verdict(report, 9, ok, f"{len(na)} CSV files byte-identical across two runs: {ba == bb}")
