"""Exact N-boson propagation on a tensor grid and reduced-density diagnostics.

Amplitude tensors carry one block of ``dim`` axes per particle and are normalized so that
sum |Psi|^2 h^(N dim) = 1. One-body operators are represented as matrices in the
orthonormal grid basis e_j = delta_j / sqrt(h^dim).
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy import integrate, linalg

from . import spectral as sp
from .dynamics import HartreeParams
from .errors import CapacityError, ConfigError, PropagationError
from .spectral import Field, Grid

log = logging.getLogger(__name__)

MAX_AMPLITUDES = 2**27


class NumericalError(RuntimeError):
    pass


@dataclass
class ManyBodyState:
    N: int
    grid: Grid
    amplitudes: np.ndarray
    params: HartreeParams

    def __post_init__(self):
        if self.N < 2:
            raise ConfigError("N must be >= 2")
        if self.params.alpha <= 0:
            raise ConfigError("many-body runs need a regularized interaction (alpha > 0)")

    @property
    def dim(self):
        return self.grid.dim

    def norm(self) -> float:
        a = self.amplitudes
        return math.sqrt(float(np.vdot(a, a).real) * self.grid.cell_volume**self.N)

    def coefficients(self) -> np.ndarray:
        """Amplitudes in the orthonormal product basis, shape (M^dim, M^((N-1) dim))."""
        m = self.grid.size
        return self.amplitudes.reshape(m, -1) * self.grid.cell_volume ** (self.N / 2)

    def swap(self, i: int, j: int) -> np.ndarray:
        d = self.dim
        order = list(range(self.N * d))
        order[i * d:(i + 1) * d], order[j * d:(j + 1) * d] = (
            order[j * d:(j + 1) * d], order[i * d:(i + 1) * d])
        return np.transpose(self.amplitudes, order)

    def symmetry_defect(self) -> float:
        a = self.amplitudes
        scale = float(np.max(np.abs(a)))
        return max(float(np.max(np.abs(self.swap(0, j) - a))) for j in range(1, self.N)) / scale

    def copy(self) -> "ManyBodyState":
        return ManyBodyState(self.N, self.grid, self.amplitudes.copy(), self.params)


@dataclass
class ReducedDensity:
    k: int
    matrix: np.ndarray
    grid: Grid

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return linalg.eigvalsh(self.matrix)


def _check_capacity(M, N, d, limit=MAX_AMPLITUDES):
    n = M ** (N * d)
    if n > limit:
        raise CapacityError(f"N={N}, M={M}, d={d} needs {n} amplitudes > capacity {limit}")
    return n


def product_state(phi0: Field, N: int, params: HartreeParams,
                  capacity: int = MAX_AMPLITUDES) -> ManyBodyState:
    """phi0^{tensor N}."""
    if abs(sp.l2_mass(phi0) - 1) > 2e-8:
        raise ConfigError("phi0 must have unit L2 norm")
    n = _check_capacity(phi0.grid.points, N, phi0.grid.dim, capacity)
    log.info("many-body tensor: %d amplitudes, %.1f MB", n, n * 16 / 2**20)
    v = np.asarray(phi0.values, dtype=complex)
    a = v
    for _ in range(N - 1):
        a = np.multiply.outer(a, v)
    return ManyBodyState(N, phi0.grid, a, params)


def symmetrize(amplitudes: np.ndarray, N: int, dim: int = 1) -> np.ndarray:
    """Average over all particle permutations."""
    out = np.zeros_like(amplitudes)
    perms = list(itertools.permutations(range(N)))
    for p in perms:
        order = [p[i] * dim + a for i in range(N) for a in range(dim)]
        out += np.transpose(amplitudes, order)
    return out / len(perms)


def pair_sum(grid: Grid, N: int, params: HartreeParams) -> np.ndarray:
    """sum_{i<j} 1/(|x_i - x_j|^gamma + alpha) on the full tensor grid."""
    d = grid.dim
    # pair kernel as a (M,)*d x (M,)*d array over (x_i, x_j)
    diff2 = 0.0
    for a in range(d):
        xa = grid.axis
        diff2 = diff2 + np.subtract.outer(xa, xa).reshape(
            [grid.points if b in (a, d + a) else 1 for b in range(2 * d)]) ** 2
    W = 1.0 / (np.sqrt(diff2) ** params.gamma + params.alpha)
    U = np.zeros((grid.points,) * (N * d))
    for i in range(N):
        for j in range(i + 1, N):
            shape = [1] * (N * d)
            for a in range(d):
                shape[i * d + a] = grid.points
                shape[j * d + a] = grid.points
            U += W.reshape(shape)
    return U


def kinetic_symbol(grid: Grid, N: int, sigma: float) -> np.ndarray:
    """sum_i |k_i|^(2 sigma) on the full tensor grid."""
    d = grid.dim
    kk = grid.k_squared() ** sigma
    out = np.zeros((grid.points,) * (N * d))
    for i in range(N):
        shape = [1] * (N * d)
        for a in range(d):
            shape[i * d + a] = grid.points
        out += kk.reshape(shape)
    return out


def _coupling(psi: ManyBodyState) -> float:
    p = psi.params
    return p.mu * p.lam / (psi.N - 1)


def mb_energy(psi: ManyBodyState, U=None) -> float:
    """<Psi, H_N^(alpha) Psi>."""
    a = psi.amplitudes
    ah = sfft.fftn(a, workers=sp.get_threads())
    vol = psi.grid.cell_volume**psi.N
    kin = float(np.sum(kinetic_symbol(psi.grid, psi.N, psi.params.sigma) * np.abs(ah) ** 2))
    kin *= vol / a.size
    if U is None:
        U = pair_sum(psi.grid, psi.N, psi.params)
    pot = _coupling(psi) * float(np.sum(U * np.abs(a) ** 2)) * vol
    return kin + pot


def energy_lower_bound(psi: ManyBodyState) -> float:
    """N min(mu, 0) lambda / (2 alpha): the interaction term is at least this."""
    p = psi.params
    return psi.N * min(p.mu, 0) * p.lam / (2 * p.alpha)


def mb_evolve(psi: ManyBodyState, horizon: float, dt: float | None = None,
              sample_every: int = 10, copy: bool = True):
    """Strang-split propagation; yields (t, state) at t = 0 and every ``sample_every`` steps.

    With ``copy=False`` the yielded state shares storage with the integrator and is only
    valid until the generator resumes.
    """
    dt = psi.params.dt if dt is None else dt
    nsteps = int(round(horizon / dt))
    if abs(nsteps * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ConfigError(f"horizon {horizon} is not a multiple of dt {dt}")
    grid, N, params = psi.grid, psi.N, psi.params
    workers = sp.get_threads()
    a = np.array(psi.amplitudes, dtype=complex)
    coupling = _coupling(psi)
    del psi  # lets the caller release the initial tensor
    kin_half = np.exp(-0.5j * dt * kinetic_symbol(grid, N, params.sigma))
    U = pair_sum(grid, N, params)
    U *= -dt * coupling
    int_phase = np.exp(1j * U)
    del U

    def kinetic(a, full):
        ah = sfft.fftn(a, workers=workers, overwrite_x=True)
        ah *= kin_half
        if full:
            ah *= kin_half
        return sfft.ifftn(ah, workers=workers, overwrite_x=True)

    def emit(t, a):
        st = ManyBodyState(N, grid, a.copy() if copy else a, params)
        return t, st

    yield emit(0.0, a)
    n = 0
    while n < nsteps:
        block = min(sample_every, nsteps - n)
        last = a.copy() if a.size <= 2**22 else None
        a = kinetic(a, full=False)
        for j in range(block):
            a *= int_phase
            if j < block - 1:
                a = kinetic(a, full=True)
        a = kinetic(a, full=False)
        n += block
        if not np.all(np.isfinite(a)):
            raise PropagationError(f"non-finite amplitude before t={n * dt:g}",
                                   checkpoint=last, time=(n - block) * dt)
        yield emit(n * dt, a)


def reduce_density_1(psi: ManyBodyState) -> ReducedDensity:
    """gamma^(1) = Tr_{2..N} |Psi><Psi| as a matrix in the orthonormal grid basis."""
    c = psi.coefficients()
    G = c @ c.conj().T
    return ReducedDensity(1, G, psi.grid)


def _basis_vector(phi: Field) -> np.ndarray:
    return np.asarray(phi.values, dtype=complex).ravel() * math.sqrt(phi.grid.cell_volume)


def pickl_functional(psi: ManyBodyState, phi: Field) -> float:
    """a = <Psi, (1 - |phi><phi|_1) Psi>, by contracting phi-bar into the first particle."""
    if abs(sp.l2_mass(phi) - 1) > 2e-8:
        raise ConfigError("phi must have unit L2 norm")
    w = _basis_vector(phi).conj() @ psi.coefficients()
    a = 1.0 - float(np.vdot(w, w).real)
    if -1e-12 < a < 0:
        a = 0.0
    elif 1 < a < 1 + 1e-12:
        a = 1.0
    return a


def _difference(rho: ReducedDensity, phi: Field) -> np.ndarray:
    v = _basis_vector(phi)
    if v.size != rho.matrix.shape[0]:
        raise ConfigError("field and density dimensions differ")
    return rho.matrix - np.outer(v, v.conj())


def _trace_norm(D: np.ndarray) -> float:
    D = 0.5 * (D + D.conj().T)
    try:
        ev = linalg.eigvalsh(D)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed; condition number {np.linalg.cond(D):.3e}") from exc
    return float(np.sum(np.abs(ev)))


def schatten_distances(rho: ReducedDensity, phi: Field) -> tuple:
    """(Tr|gamma - P|, ||gamma - P||_HS)."""
    D = _difference(rho, phi)
    return _trace_norm(D), float(np.sqrt(np.sum(np.abs(D) ** 2)))


def _fourier_conjugate(D: np.ndarray, grid: Grid) -> np.ndarray:
    """F D F^dagger with the unitary DFT acting on each matrix index."""
    d = grid.dim
    T = D.reshape(grid.shape * 2)
    row_axes = tuple(range(d))
    col_axes = tuple(range(d, 2 * d))
    T = sfft.fftn(T, axes=row_axes, norm="ortho")
    T = sfft.ifftn(T, axes=col_axes, norm="ortho")
    return T.reshape(D.shape)


def weighted_trace_distance(rho: ReducedDensity, phi: Field, theta: float, sigma: float) -> float:
    """Tr| W (gamma - P) W | with W = (1 + |k|^(2 sigma))^(theta/2)."""
    D = _difference(rho, phi)
    if theta == 0:
        return _trace_norm(D)
    w = ((1.0 + rho.grid.k_squared() ** sigma) ** (theta / 2)).ravel()
    A = _fourier_conjugate(D, rho.grid)
    return _trace_norm(w[:, None] * A * w[None, :])


def one_body_sobolev_moment(rho: ReducedDensity, s: float, sigma: float) -> float:
    """Tr[(1 + S)^s gamma] = ||S_{1,s}^{1/2} Psi||^2."""
    A = _fourier_conjugate(rho.matrix, rho.grid)
    w = ((1.0 + rho.grid.k_squared() ** sigma) ** s).ravel()
    return float(np.sum(w * np.diag(A).real))


def interpolation_bound_check(psi: ManyBodyState, phi: Field, theta: float, s: float,
                              sigma: float | None = None, rho: ReducedDensity | None = None) -> dict:
    """Weighted trace distance against k C (a^min(1/2, 1-theta) + ||gamma - P||_HS^(1-theta)),

    C = 2 (||S_{1,s}^{1/2} Psi|| + ||S^{s/2} phi||)^max(1, 2 theta), k = 1.
    """
    if not 0 <= theta < 1:
        raise ConfigError("theta must lie in [0, 1)")
    sigma = psi.params.sigma if sigma is None else sigma
    rho = reduce_density_1(psi) if rho is None else rho
    lhs = weighted_trace_distance(rho, phi, theta * s, sigma)
    a = pickl_functional(psi, phi)
    _, hs = schatten_distances(rho, phi)
    psi_norm = math.sqrt(one_body_sobolev_moment(rho, s, sigma))
    phi_norm = math.sqrt(sp._weighted_norm(phi, phi.grid.k_squared() ** (sigma * s)) ** 2)
    C = 2.0 * (psi_norm + phi_norm) ** max(1.0, 2 * theta)
    rhs = C * (a ** min(0.5, 1 - theta) + hs ** (1 - theta))
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return {"theta": theta, "s": s, "lhs": lhs, "rhs": rhs, "ratio": ratio, "a": a, "hs": hs,
            "constant": C, "passed": bool(lhs <= rhs)}


def sup_potential_integral(traj) -> float:
    """int_0^t || K_2 * |phi_tau|^2 ||_inf^(1/2) dtau, K_2 the squared interaction kernel."""
    spec = traj.params.kernel(squared=True)
    ts, vals = [], []
    for t, f in traj.fields:
        conv = sp._convolve_array(np.abs(f.values) ** 2, f.grid, spec)
        ts.append(t)
        vals.append(math.sqrt(float(np.max(np.abs(conv)))))
    if len(ts) < 2:
        return 0.0
    return float(integrate.trapezoid(vals, ts))


def two_mode_state(phi: Field, chi: Field, params: HartreeParams) -> ManyBodyState:
    """(phi x chi + chi x phi)/norm for two particles."""
    a = np.multiply.outer(phi.values, chi.values)
    a = a + a.T if phi.grid.dim == 1 else a + np.transpose(a, _swap_order(phi.grid.dim))
    st = ManyBodyState(2, phi.grid, a.astype(complex), params)
    st.amplitudes /= st.norm()
    return st


def _swap_order(d):
    return list(range(d, 2 * d)) + list(range(d))


def random_symmetric_state(grid: Grid, N: int, params: HartreeParams, rng) -> ManyBodyState:
    shape = (grid.points,) * (N * grid.dim)
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    st = ManyBodyState(N, grid, symmetrize(a, N, grid.dim), params)
    st.amplitudes /= st.norm()
    return st
