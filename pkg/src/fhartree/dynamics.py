"""Split-step propagation of the (regularized) fractional Hartree equation

    i d/dt phi = (-Delta)^sigma phi + mu lambda (K * |phi|^2) phi,   K = 1/(|x|^gamma + alpha).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import spectral as sp
from .errors import ConfigError, PropagationError
from .spectral import Field, KernelSpec


@dataclass(frozen=True)
class HartreeParams:
    gamma: float
    sigma: float
    mu: int
    lam: float
    alpha: float = 0.0
    dt: float = 2e-3
    method: str | None = None
    lambda_critical: float | None = None
    force: bool = False

    def __post_init__(self):
        validate_params(self)

    def kernel(self, squared=False) -> KernelSpec:
        method = self.method or ("padded_real_kernel" if self.alpha > 0 else "fourier_symbol")
        return KernelSpec(self.gamma, self.alpha, method, squared)

    def replace(self, **kw) -> "HartreeParams":
        return replace(self, **kw)


def validate_params(p) -> None:
    if not 0 < p.gamma < 1.5:
        raise ConfigError(f"gamma={p.gamma} outside (0, 3/2)")
    if not (p.gamma / 2 - 1e-12 <= p.sigma <= 1):
        raise ConfigError(f"sigma={p.sigma} outside [gamma/2, 1] = [{p.gamma / 2}, 1]")
    if p.mu not in (-1, 1):
        raise ConfigError(f"mu={p.mu} must be -1 or +1")
    if p.lam < 0:
        raise ConfigError(f"lambda={p.lam} must be positive")
    if p.alpha < 0:
        raise ConfigError(f"alpha={p.alpha} must be >= 0")
    if p.dt == 0 or not math.isfinite(p.dt):
        raise ConfigError("dt must be finite and nonzero")
    if (p.mu == -1 and p.alpha == 0 and p.lambda_critical is not None
            and p.lam >= p.lambda_critical and not p.force):
        raise ConfigError(
            f"focusing run with lambda={p.lam} >= lambda_Hc={p.lambda_critical}; set force=True")


def hartree_potential(phi: Field, params: HartreeParams) -> Field:
    """mu lambda (K_{gamma,alpha} * |phi|^2), real."""
    if params.lam == 0:
        return phi.with_values(np.zeros(phi.grid.shape))
    rho = np.abs(phi.values) ** 2
    pot = sp._convolve_array(rho, phi.grid, params.kernel())
    return phi.with_values(params.mu * params.lam * pot)


def _potential_array(values, grid, params):
    if params.lam == 0:
        return np.zeros(grid.shape)
    return params.mu * params.lam * sp._convolve_array(np.abs(values) ** 2, grid, params.kernel())


def max_stable_dt(grid, sigma) -> float:
    return 20 * math.pi / float(grid.k_squared().max()) ** sigma


def _check_dt(grid, params, dt):
    limit = max_stable_dt(grid, params.sigma)
    if abs(dt) > limit:
        warnings.warn(f"dt={dt:g} under-resolves the fastest kinetic phase; use dt <= {limit:.3g}",
                      RuntimeWarning, stacklevel=3)


def strang_step(phi: Field, params: HartreeParams, dt: float | None = None) -> Field:
    """One step K(dt/2) P(dt) K(dt/2). Each substep is an exact phase, so mass is kept."""
    dt = params.dt if dt is None else dt
    _check_dt(phi.grid, params, dt)
    half = np.exp(-0.5j * dt * phi.grid.k_squared() ** params.sigma)
    v = sp.ifftn(half * sp.fftn(phi.values))
    v = v * np.exp(-1j * dt * _potential_array(v, phi.grid, params))
    return phi.with_values(sp.ifftn(half * sp.fftn(v)))


DIAGNOSTIC_COLUMNS = ("t", "mass", "T", "V", "E", "sup_potential")


@dataclass
class Trajectory:
    params: HartreeParams
    grid: sp.Grid
    times: np.ndarray
    fields: list
    diagnostics: dict
    sobolev_orders: tuple = ()
    blowup: bool = False
    blowup_time: float | None = None

    @property
    def samples(self):
        return list(zip([t for t, _ in self.fields], [f for _, f in self.fields]))

    def column(self, name):
        return np.asarray(self.diagnostics[name])

    def field_at(self, t):
        for ti, f in self.fields:
            if abs(ti - t) < 1e-12 * max(1.0, abs(t)):
                return f
        raise KeyError(t)


def _diag_record(values, phat, grid, params, sobolev_orders, t):
    vol, size = grid.cell_volume, grid.size
    k2 = grid.k_squared()
    a2 = np.abs(phat) ** 2
    mass = float(np.sum(np.abs(values) ** 2)) * vol
    T = 0.5 * float(np.sum(k2**params.sigma * a2)) * vol / size
    rho = np.abs(values) ** 2
    conv = sp._convolve_array(rho, grid, params.kernel())
    V = 0.25 * params.mu * params.lam * float(np.sum(conv * rho)) * vol
    rec = {"t": t, "mass": mass, "T": T, "V": V, "E": T + V,
           "sup_potential": float(np.max(np.abs(conv)))}
    for s in sobolev_orders:
        rec[f"H^{s:g}"] = math.sqrt(float(np.sum((1 + k2) ** s * a2)) * vol / size)
    return rec


def evolve(phi0: Field, params: HartreeParams, horizon: float, stride: int = 10,
           diag_every: int = 1, sobolev_orders=None, blowup_factor: float | None = None,
           check_norm: bool = True) -> Trajectory:
    """Integrate to ``horizon``; fields stored every ``stride`` steps, diagnostics every ``diag_every``.

    ``sup_potential`` is sup |K * |phi|^2| (no coupling factor).
    """
    grid = phi0.grid
    if check_norm and abs(sp.l2_mass(phi0) - 1) > 2e-8:
        raise ConfigError(f"initial datum must have unit L2 norm, got mass {sp.l2_mass(phi0):.12g}")
    if sobolev_orders is None:
        sobolev_orders = tuple(sorted({params.gamma / 2, params.sigma}))
    dt = params.dt
    nsteps = int(round(horizon / dt))
    if nsteps < 0 or abs(nsteps * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ConfigError(f"horizon {horizon} is not a multiple of dt {dt}")
    _check_dt(grid, params, dt)
    half = np.exp(-0.5j * dt * grid.k_squared() ** params.sigma)

    v = np.array(phi0.values, dtype=complex)
    vh = sp.fftn(v)
    diags = [_diag_record(v, vh, grid, params, sobolev_orders, 0.0)]
    fields = [(0.0, Field(grid, v.copy()))]
    T0 = diags[0]["T"]
    blown, t_blow = False, None
    for n in range(1, nsteps + 1):
        last = v
        w = sp.ifftn(half * vh)
        w *= np.exp(-1j * dt * _potential_array(w, grid, params))
        vh = half * sp.fftn(w)
        v = sp.ifftn(vh)
        t = n * dt
        if not np.all(np.isfinite(v)):
            raise PropagationError(f"non-finite amplitude at t={t:g}",
                                   checkpoint=Field(grid, last), time=t - dt)
        if n % diag_every == 0 or n == nsteps:
            diags.append(_diag_record(v, vh, grid, params, sobolev_orders, t))
        if n % stride == 0 or n == nsteps:
            fields.append((t, Field(grid, v.copy())))
        if blowup_factor is not None and diags[-1]["T"] > blowup_factor * T0:
            blown, t_blow = True, diags[-1]["t"]
            if fields[-1][0] != t:
                fields.append((t, Field(grid, v.copy())))
            break
    cols = {k: np.array([d[k] for d in diags]) for k in diags[0]}
    return Trajectory(params, grid, cols["t"], fields, cols, tuple(sobolev_orders), blown, t_blow)


def free_evolution(phi0: Field, sigma: float, t: float) -> Field:
    """Exact linear flow exp(-i t (-Delta)^sigma)."""
    return phi0.with_values(sp.ifftn(np.exp(-1j * t * phi0.grid.k_squared() ** sigma)
                                     * sp.fftn(phi0.values)))


def persistence_report(traj: Trajectory, s: float) -> dict:
    """Sobolev growth relative to the exponential envelope exp(c nu^2 t)."""
    ts = np.array([t for t, _ in traj.fields])
    hs = np.array([sp.sobolev_norm(f, s) for _, f in traj.fields])
    nu = max(sp.sobolev_norm(f, traj.params.gamma / 2) for _, f in traj.fields)
    ratio = hs / hs[0]
    pos = ts > 0
    logs = np.log(np.maximum(ratio[pos], 1e-300)) / (nu**2 * ts[pos])
    c = max(0.0, float(logs.max())) if pos.any() else 0.0
    if c < 1e-12:
        c = 0.0
    return {"s": s, "nu": float(nu), "times": ts, "ratio": ratio, "c": c,
            "linear_envelope_ok": bool(np.all(ratio <= (ts + 1.0) * 1.2))}


def blowup_monitor(traj: Trajectory, factor: float = 5.0) -> dict:
    """Threshold event on T^(sigma); no singularity time is claimed."""
    ts = traj.column("t")
    T = traj.column("T")
    growth = T / T[0]
    over = np.nonzero(growth >= factor)[0]
    flagged = bool(over.size)
    return {"times": ts, "kinetic": T, "growth": growth, "max_growth": float(growth.max()),
            "flag": flagged, "first_time": float(ts[over[0]]) if flagged else None,
            "factor": factor}
