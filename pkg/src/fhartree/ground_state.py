"""Soliton profiles (-Delta)^sigma Q + omega Q = (|x|^-gamma * Q^2) Q and the critical mass."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import spectral as sp
from .errors import ConfigError, ConvergenceError, DivergenceError, StepSizeError
from .spectral import Field, Grid, KernelSpec


@dataclass
class GroundState:
    profile: Field
    omega: float
    residual: float
    critical_mass: float
    gamma: float
    sigma: float
    iterations: int = 0
    history: list = field(default_factory=list)
    coupling: float = 1.0

    @property
    def mass_critical(self) -> bool:
        return abs(self.sigma - self.gamma / 2) < 1e-12

    def metadata(self) -> dict:
        return {"gamma": self.gamma, "sigma": self.sigma, "omega": self.omega,
                "residual": self.residual, "mass": self.critical_mass}


class _Ops:
    """Real-transform building blocks shared by both solvers."""

    def __init__(self, grid: Grid, gamma: float, sigma: float):
        self.grid = grid
        self.shape = grid.shape
        self.k2s = grid.k_squared_half() ** sigma
        self.sym = sp.kernel_symbol(grid, KernelSpec(gamma, 0.0, "fourier_symbol"))
        self.vol = grid.cell_volume

    def hat(self, u):
        return sp.rfftn(u)

    def inv(self, uh):
        return sp.irfftn(uh, s=self.shape)

    def conv(self, u):
        return self.inv(self.sym * self.hat(u * u))

    def dot(self, a, b):
        return float(np.sum(a * b)) * self.vol

    def center(self, uh, u):
        """Shift so the density barycenter sits at the origin (periodic-safe for localized u)."""
        w = u * u
        tot = w.sum()
        shift = []
        for ax, x in enumerate(self.grid.coords()):
            # the plane x = -L has no mirror partner; zero weight keeps even profiles even
            x = x.copy()
            x[(slice(None),) * ax + (0,)] = 0.0
            shift.append(float(np.sum(w * x)) / tot)
        if max(abs(c) for c in shift) < 1e-9 * self.grid.spacing:
            return uh
        kx = [2 * np.pi * np.fft.fftfreq(self.grid.points, self.grid.spacing)] * self.grid.dim
        kx[-1] = 2 * np.pi * np.fft.rfftfreq(self.grid.points, self.grid.spacing)
        mesh = np.meshgrid(*kx, indexing="ij", sparse=True)
        return uh * np.exp(1j * sum(k * c for k, c in zip(mesh, shift)))


def _initial_guess(grid, init):
    if init is None:
        g = sp.gaussian(grid, grid.half_width / 6)
        return g.values.real.copy()
    vals = init.values if isinstance(init, Field) else np.asarray(init)
    return np.array(np.real(vals), dtype=float)


def petviashvili_solve(gamma: float, sigma: float, grid: Grid, omega: float = 1.0,
                       tol: float = 1e-10, max_iter: int = 1000, init=None,
                       recenter: bool = True) -> GroundState:
    """Spectral renormalization with stabilizing exponent 3/2 (cubic homogeneity)."""
    if gamma >= grid.dim:
        raise ConfigError("gamma must be below the dimension")
    if not omega > 0:
        raise ConfigError("omega must be positive")
    ops = _Ops(grid, gamma, sigma)
    lop = ops.k2s + omega
    Q = _initial_guess(grid, init)
    if Q.min() < 0 and Q.max() <= 0:
        raise ConfigError("initial guess must be positive")
    history = []
    for it in range(max_iter):
        Qh = ops.hat(Q)
        LQ = ops.inv(lop * Qh)
        N = ops.conv(Q) * Q
        res = float(np.max(np.abs(LQ - N)))
        history.append(res)
        if res <= tol:
            return GroundState(Field(grid, Q), omega, res, ops.dot(Q, Q), gamma, sigma,
                               it, history)
        factor = ops.dot(Q, LQ) / ops.dot(Q, N)
        if not math.isfinite(factor) or factor <= 0 or factor > 1e8 or factor < 1e-8:
            raise DivergenceError(f"renormalization factor {factor!r} at iteration {it}",
                                  Field(grid, Q), history)
        Nh = ops.hat(N)
        if recenter:
            Nh = ops.center(Nh, N)
        Q = ops.inv(factor**1.5 * Nh / lop)
        if len(history) > 60 and min(history[-20:]) > 0.999 * min(history[-60:-20]):
            raise DivergenceError("residual stagnating or oscillating", Field(grid, Q), history)
    raise ConvergenceError(f"no convergence in {max_iter} iterations (residual {history[-1]:.3e})",
                           Field(grid, Q), history)


def critical_mass(gs: GroundState) -> float:
    """lambda_{H,c}: ||Q||^2 when sigma = gamma/2, infinite in the mass-subcritical case."""
    if gs.sigma > gs.gamma / 2 + 1e-12:
        return math.inf
    return sp.l2_mass(gs.profile)


def equation_defect(gs: GroundState) -> float:
    """Sup-norm defect recomputed with the public field operators."""
    Q = gs.profile.with_values(gs.profile.values.astype(complex))
    lhs = sp.frac_laplacian_apply(Q, gs.sigma).values + gs.omega * Q.values
    rho = Q.with_values(np.abs(Q.values) ** 2)
    rhs = sp.riesz_convolve(rho, KernelSpec(gs.gamma)).values * Q.values
    return float(np.max(np.abs(lhs - rhs)))


def gradient_flow_minimize(gamma: float, sigma: float, grid: Grid, mass: float = 1.0,
                           tol: float = 1e-8, lam: float = 1.0, tau: float = 0.5,
                           max_iter: int = 20000, omega: float = 1.0, init=None) -> GroundState:
    """Normalized gradient flow for E = T - (lam/4) <u, (K*u^2) u> at fixed ||u||^2 = mass.

    Preconditioned projected gradient step u* = u - (1/tau + S + b)^-1 r with r the
    tangential gradient, then L2 renormalization; fixed points are exact critical points.
    The returned profile sqrt(lam) u solves the soliton equation with omega the Lagrange
    multiplier.

    At sigma = gamma/2 the mass is not a free parameter (E has no minimizer at generic
    mass and the periodic box favours spreading), so the flow is run on the sphere
    <u, (S + omega) u> = 1 instead, ascending <u, (K*u^2) u>; ``mass`` is then unused and
    the critical mass comes out of the converged profile.
    """
    if sigma < gamma / 2 - 1e-12:
        raise ConfigError("sigma must be >= gamma/2")
    if abs(sigma - gamma / 2) < 1e-12 and lam > 0:
        return _weighted_sphere_flow(gamma, sigma, grid, omega, tol, 8 * tau, max_iter, init)
    ops = _Ops(grid, gamma, sigma)
    u = _initial_guess(grid, init)
    u *= math.sqrt(mass / ops.dot(u, u))

    def state(u):
        Su = ops.inv(ops.k2s * ops.hat(u))
        c = ops.conv(u) if lam else np.zeros_like(u)
        return Su, c, 0.5 * ops.dot(u, Su) - lam * ops.dot(c * u, u) / 4

    Su, c, E = state(u)
    history = [E]
    res = math.inf
    for it in range(max_iter):
        grad = Su - lam * c * u
        mult = -ops.dot(u, grad) / mass
        res = float(np.max(np.abs(grad + mult * u)))
        if res <= tol:
            break
        # constant shifts of the potential only move the multiplier, so the stabilizer uses
        # the oscillation of lam*c
        b = float(np.ptp(lam * c))
        rh = ops.hat(grad + mult * u)
        step = tau
        while True:
            un = u - ops.inv(rh / (1 / step + ops.k2s + b))
            un *= math.sqrt(mass / ops.dot(un, un))
            Sn, cn, En = state(un)
            if En <= E + 1e-13 * max(1.0, abs(E)):
                break
            step *= 0.5
            if step < 1e-8 * tau:
                raise StepSizeError(f"energy increased at iteration {it} for every step size")
        u, Su, c, E = un, Sn, cn, En
        history.append(E)
    else:
        raise ConvergenceError(f"gradient flow did not reach tol={tol:g} (residual {res:.3e})",
                               Field(grid, u), history)
    prof = math.sqrt(lam) * u if lam > 0 else u
    return GroundState(Field(grid, prof), mult, res, lam * mass if lam > 0 else mass,
                       gamma, sigma, it, history, coupling=lam)


def _weighted_sphere_flow(gamma, sigma, grid, omega, tol, tau, max_iter, init):
    ops = _Ops(grid, gamma, sigma)
    lop = ops.k2s + omega
    u = _initial_guess(grid, init)

    def normalize(u):
        return u / math.sqrt(ops.dot(u, ops.inv(lop * ops.hat(u))))

    def state(u):
        c = ops.conv(u)
        return c, ops.dot(c * u, u)

    u = normalize(u)
    c, P = state(u)
    history = [-P]
    res = math.inf
    for it in range(max_iter):
        # preconditioned gradient of P/4 and its tangential part in the <., (S+omega) .> metric
        v = ops.inv(ops.hat(c * u) / lop)
        res = float(np.max(np.abs(c * u - P * ops.inv(lop * ops.hat(u))))) / P**1.5
        if res <= tol:
            break
        d = v - P * u
        step = tau
        while True:
            un = normalize(u + step * d)
            cn, Pn = state(un)
            if Pn >= P - 1e-13 * P:
                break
            step *= 0.5
            if step < 1e-8:
                raise StepSizeError(f"objective increased at iteration {it} for every step size")
        u, c, P = un, cn, Pn
        history.append(-P)
    else:
        raise ConvergenceError(f"gradient flow did not reach tol={tol:g} (residual {res:.3e})",
                               Field(grid, u), history)
    Q = u / math.sqrt(P)
    return GroundState(Field(grid, Q), omega, res, ops.dot(Q, Q), gamma, sigma, it, history)
