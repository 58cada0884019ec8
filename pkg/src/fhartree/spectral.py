"""Periodic grids, Fourier multipliers, singular-kernel convolutions, norms and energies."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.fft as sfft
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from .errors import CapacityError, ConfigError, UndefinedRatioError

_THREADS = 1
MAX_PADDED_POINTS = 2**27


def set_threads(n: int) -> None:
    """Cap FFT parallelism. Results are bit-deterministic for a fixed count."""
    global _THREADS
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    _THREADS = int(n)


def get_threads() -> int:
    return _THREADS


def fftn(a, axes=None):
    return sfft.fftn(a, axes=axes, workers=_THREADS)


def ifftn(a, axes=None):
    return sfft.ifftn(a, axes=axes, workers=_THREADS)


def rfftn(a, axes=None):
    return sfft.rfftn(a, axes=axes, workers=_THREADS)


def irfftn(a, s, axes=None):
    return sfft.irfftn(a, s=s, axes=axes, workers=_THREADS)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the box [-L, L)^dim with M points per axis."""

    dim: int
    points: int
    half_width: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.points < 8 or self.points % 2:
            raise ConfigError(f"points per axis must be even and >= 8, got {self.points}")
        if not self.half_width > 0:
            raise ConfigError("half_width must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.points)

    @property
    def wavenumbers(self) -> np.ndarray:
        """1D wavenumbers pi*m/L in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    def coords(self) -> list:
        """Broadcastable (sparse) coordinate arrays."""
        return np.meshgrid(*([self.axis] * self.dim), indexing="ij", sparse=True)

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.coords()))

    def k_squared(self) -> np.ndarray:
        return _k_squared(self.dim, self.points, self.half_width)

    def k_squared_half(self) -> np.ndarray:
        """|k|^2 on the half spectrum used by real transforms."""
        return _k_squared(self.dim, self.points, self.half_width, half=True)

    def scaled(self, factor: float) -> "Grid":
        return Grid(self.dim, self.points, self.half_width * factor)


@functools.lru_cache(maxsize=32)
def _k_squared(dim, points, half_width, half=False):
    k = 2.0 * np.pi * np.fft.fftfreq(points, d=2.0 * half_width / points)
    axes = [k] * dim
    if half:
        axes[-1] = 2.0 * np.pi * np.fft.rfftfreq(points, d=2.0 * half_width / points)
    mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
    out = sum(m * m for m in mesh)
    out = np.broadcast_to(out, tuple(len(a) for a in axes)).copy()
    out.setflags(write=False)
    return out


@dataclass
class Field:
    """Complex amplitudes sampled on a grid, normalized so that sum |v|^2 h^d is the L2 mass."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            self.values = self.values.reshape(self.grid.shape)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __mul__(self, c):
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other):
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other):
        return Field(self.grid, self.values - other.values)


def gaussian(grid: Grid, width: float = 1.0, center=None, normalize=True, momentum=None) -> Field:
    """exp(-|x-c|^2 / (2 width^2)) with optional plane-wave phase, unit L2 norm by default."""
    xs = grid.coords()
    center = np.zeros(grid.dim) if center is None else np.asarray(center, float)
    r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
    v = np.exp(-r2 / (2.0 * width**2)).astype(complex)
    if momentum is not None:
        v = v * np.exp(1j * sum(p * x for p, x in zip(momentum, xs)))
    f = Field(grid, np.broadcast_to(v, grid.shape).copy())
    if normalize:
        f.values /= math.sqrt(l2_mass(f))
    return f


def plane_wave(grid: Grid, mode, amplitude=1.0) -> Field:
    """amplitude * exp(i k0.x) for the integer mode index (one entry per axis)."""
    k0 = [np.pi * m / grid.half_width for m in mode]
    phase = sum(k * x for k, x in zip(k0, grid.coords()))
    return Field(grid, np.broadcast_to(amplitude * np.exp(1j * phase), grid.shape).copy())


def _check_finite(f: Field):
    if not np.all(np.isfinite(f.values)):
        raise ValueError("field contains non-finite amplitudes")


def frac_laplacian_apply(f: Field, sigma: float) -> Field:
    """(-Delta)^sigma via the multiplier |k|^(2 sigma)."""
    _check_finite(f)
    if not 0 < sigma <= 1:
        raise ConfigError(f"sigma must lie in (0, 1], got {sigma}")
    sym = f.grid.k_squared() ** sigma
    return f.with_values(ifftn(sym * fftn(f.values)))


@dataclass(frozen=True)
class SobolevIndex:
    """Fourier weight (1+|k|^2)^(s/2) (``standard_hs``) or (1+|k|^(2 sigma))^(s/2) (``operator_weight``)."""

    s: float
    sigma: float = 1.0
    convention: str = "standard_hs"

    def __post_init__(self):
        if self.convention not in ("standard_hs", "operator_weight"):
            raise ConfigError(f"unknown Sobolev convention {self.convention!r}")
        if not 0 < self.sigma <= 1:
            raise ConfigError("sigma must lie in (0, 1]")

    def weight(self, k2: np.ndarray) -> np.ndarray:
        if self.convention == "standard_hs":
            return (1.0 + k2) ** (self.s / 2)
        return (1.0 + k2**self.sigma) ** (self.s / 2)


def sobolev_weight_apply(f: Field, idx: SobolevIndex) -> Field:
    return f.with_values(ifftn(idx.weight(f.grid.k_squared()) * fftn(f.values)))


# --- convolution kernels -------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    """Interaction 1/(|x|^gamma + alpha), or its square when ``squared``.

    ``truncate`` selects, for the Fourier-symbol method, the transform of the kernel cut off
    at radius L (free-space accurate for densities inside |x| < L/2) rather than the bare
    Riesz symbol with its zero mode removed.
    """

    gamma: float
    alpha: float = 0.0
    method: str = "fourier_symbol"
    squared: bool = False
    truncate: bool = True

    def __post_init__(self):
        if self.method not in ("fourier_symbol", "padded_real_kernel"):
            raise ConfigError(f"unknown kernel method {self.method!r}")
        if not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if not self.truncate and (self.alpha > 0 or self.squared):
            raise ConfigError("untruncated symbol only exists for the bare Riesz kernel")

    @property
    def power(self) -> float:
        return self.gamma * (2 if self.squared else 1)

    def radial(self, r):
        r = np.asarray(r, float)
        with np.errstate(divide="ignore"):
            base = 1.0 / (r**self.gamma + self.alpha)
        return base**2 if self.squared else base

    @classmethod
    def default(cls, gamma, alpha=0.0, squared=False):
        method = "padded_real_kernel" if alpha > 0 else "fourier_symbol"
        return cls(gamma, alpha, method, squared)


def riesz_constant(dim: int, gamma: float) -> float:
    """c with  int |x|^-gamma e^{-ik.x} dx = c |k|^(gamma-dim)."""
    return (
        math.pi ** (dim / 2) * 2 ** (dim - gamma)
        * special.gamma((dim - gamma) / 2) / special.gamma(gamma / 2)
    )


def _radial_nodes(R, kmax, n=16):
    # geometric panels resolve the r^-gamma singularity, uniform ones the oscillation
    r0 = min(R, np.pi / max(kmax, 1e-12))
    edges = [0.0] + [r0 * 2.0 ** (-j) for j in range(48, 0, -1)]
    n_uniform = int(np.ceil((R - r0) / (0.5 * np.pi / max(kmax, 1e-12)))) + 1
    edges = np.unique(np.concatenate([edges, np.linspace(r0, R, n_uniform + 1)]))
    xg, wg = leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    r = (0.5 * (b - a) * xg + 0.5 * (a + b)).ravel()
    w = (0.5 * (b - a) * wg).ravel()
    return r, w


def truncated_radial_transform(radial, dim: int, R: float, kvals: np.ndarray) -> np.ndarray:
    """Fourier transform of a radial kernel restricted to |x| < R, at wavenumbers ``kvals``."""
    kvals = np.asarray(kvals, float)
    r, w = _radial_nodes(R, float(kvals.max(initial=0.0)))
    kw = radial(r) * w
    out = np.empty(kvals.shape)
    for s in range(0, len(kvals), 256):
        kk = kvals[s:s + 256, None]
        if dim == 3:
            ang = 4.0 * np.pi * r * r * np.sinc(kk * r / np.pi)
        elif dim == 2:
            ang = 2.0 * np.pi * r * special.j0(kk * r)
        else:
            ang = 2.0 * np.cos(kk * r)
        out[s:s + 256] = ang @ kw
    return out


@functools.lru_cache(maxsize=64)
def kernel_symbol(grid: Grid, spec: KernelSpec, half: bool = True) -> np.ndarray:
    """Fourier multiplier of the kernel on ``grid`` (half spectrum when ``half``)."""
    if spec.alpha == 0 and spec.power >= grid.dim:
        raise ConfigError(
            f"kernel |x|^-{spec.power:g} is not locally integrable in d={grid.dim}; "
            "use a regularized kernel (alpha > 0)")
    k2 = grid.k_squared_half() if half else grid.k_squared()
    if not spec.truncate:
        sym = np.zeros_like(k2)
        nz = k2 > 0
        sym[nz] = riesz_constant(grid.dim, spec.gamma) * k2[nz] ** ((spec.gamma - grid.dim) / 2)
    else:
        uq, inv = np.unique(k2, return_inverse=True)
        vals = truncated_radial_transform(spec.radial, grid.dim, grid.half_width, np.sqrt(uq))
        sym = vals[inv].reshape(k2.shape)
    sym.setflags(write=False)
    return sym


def origin_cell_average(dim: int, power: float, h: float) -> float:
    """Mean of |x|^-power over the cell [-h/2, h/2]^dim."""
    if power >= dim:
        raise ConfigError("kernel not integrable over the origin cell")
    if dim == 1:
        unit = 2.0 / (1.0 - power)
    elif dim == 2:
        unit = 4.0 / (2.0 - power) * integrate.quad(lambda y: (1 + y * y) ** (-power / 2), -1, 1)[0]
    else:
        unit = 6.0 / (3.0 - power) * integrate.dblquad(
            lambda z, y: (1 + y * y + z * z) ** (-power / 2), -1, 1, -1, 1)[0]
    # unit cube [-1,1]^d integral, rescaled to side h
    return (h / 2) ** (-power) * unit / 2**dim


@functools.lru_cache(maxsize=32)
def padded_kernel_hat(grid: Grid, spec: KernelSpec) -> np.ndarray:
    M, h, d = grid.points, grid.spacing, grid.dim
    if (2 * M) ** d > MAX_PADDED_POINTS:
        raise CapacityError(f"padded grid {(2 * M,) * d} exceeds {MAX_PADDED_POINTS} points")
    offs = h * np.concatenate([np.arange(M), np.arange(-M, 0)])
    mesh = np.meshgrid(*([offs] * d), indexing="ij", sparse=True)
    r = np.sqrt(sum(m * m for m in mesh))
    r = np.broadcast_to(r, (2 * M,) * d)
    with np.errstate(divide="ignore"):
        kern = spec.radial(r)
    if spec.alpha == 0:
        kern = kern.copy()
        kern[(0,) * d] = origin_cell_average(d, spec.power, h)
    out = rfftn(kern) * grid.cell_volume
    out.setflags(write=False)
    return out


def _convolve_array(rho: np.ndarray, grid: Grid, spec: KernelSpec) -> np.ndarray:
    """Real density -> real convolution K * rho on ``grid``."""
    if spec.method == "fourier_symbol":
        return irfftn(kernel_symbol(grid, spec) * rfftn(rho), s=grid.shape)
    M = grid.points
    khat = padded_kernel_hat(grid, spec)
    padded = (2 * M,) * grid.dim
    big = irfftn(khat * sfft.rfftn(rho, s=padded, workers=_THREADS), s=padded)
    return np.ascontiguousarray(big[(slice(0, M),) * grid.dim])


def convolve(rho: Field, spec: KernelSpec) -> Field:
    vals = np.asarray(rho.values)
    if np.iscomplexobj(vals):
        re = _convolve_array(vals.real.copy(), rho.grid, spec)
        im = _convolve_array(vals.imag.copy(), rho.grid, spec) if np.any(vals.imag) else 0.0
        return rho.with_values(re + 1j * im if np.any(im) else re)
    return rho.with_values(_convolve_array(vals, rho.grid, spec))


def riesz_convolve(rho: Field, spec: KernelSpec) -> Field:
    """(1/|x|^gamma) * rho for the bare Riesz kernel (alpha = 0)."""
    if spec.alpha != 0:
        raise ConfigError("riesz_convolve needs alpha = 0; use regularized_convolve")
    if spec.power >= rho.grid.dim:
        raise ConfigError(
            f"gamma={spec.gamma} >= dim={rho.grid.dim}: Riesz symbol undefined, "
            "use regularized_convolve with alpha > 0")
    return convolve(rho, spec)


def regularized_convolve(rho: Field, spec: KernelSpec) -> Field:
    """1/(|x|^gamma + alpha) * rho, alpha > 0."""
    if not spec.alpha > 0:
        raise ConfigError("regularized_convolve needs alpha > 0")
    return convolve(rho, spec)


# --- norms ---------------------------------------------------------------------------


def l2_mass(f: Field) -> float:
    """Discrete L2 mass sum |f|^2 h^d."""
    return float(np.vdot(f.values, f.values).real * f.grid.cell_volume)


def l2_mass_fourier(f: Field) -> float:
    fh = fftn(f.values)
    return float(np.vdot(fh, fh).real * f.grid.cell_volume / f.grid.size)


def lp_norm(f: Field, p: float) -> float:
    a = np.abs(f.values)
    if p == np.inf:
        return float(a.max())
    if p < 1:
        raise ConfigError("p must lie in [1, inf]")
    return float((np.sum(a**p) * f.grid.cell_volume) ** (1.0 / p))


def _weighted_norm(f: Field, weight: np.ndarray) -> float:
    fh = fftn(f.values)
    return math.sqrt(float(np.sum(weight * np.abs(fh) ** 2)) * f.grid.cell_volume / f.grid.size)


def sobolev_norm(f: Field, idx) -> float:
    """H^s norm; ``idx`` is a SobolevIndex or a bare s for the standard convention."""
    if not isinstance(idx, SobolevIndex):
        idx = SobolevIndex(float(idx))
    return _weighted_norm(f, idx.weight(f.grid.k_squared()) ** 2)


def homogeneous_sobolev_norm(f: Field, s: float) -> float:
    """||  |k|^s f^ ||_2, zero mode dropped."""
    k2 = f.grid.k_squared()
    w = np.zeros_like(k2)
    nz = k2 > 0
    w[nz] = k2[nz] ** s
    return _weighted_norm(f, w)


def sobolev_lp_norm(f: Field, s: float, r: float) -> float:
    """W^{s,r}: standard H^s weight followed by the L^r quadrature norm."""
    g = sobolev_weight_apply(f, SobolevIndex(s)) if s != 0 else f
    return lp_norm(g, r)


def mixed_spacetime_norm(traj: Sequence, q: float, spatial=(0.0, 2.0)) -> float:
    """L^q_t W^{s,r}_x over samples (t, Field), trapezoidal in time."""
    traj = list(traj)
    if not traj:
        raise ValueError("empty trajectory")
    s, r = spatial
    ts = np.array([t for t, _ in traj], float)
    g = np.array([sobolev_lp_norm(f, s, r) for _, f in traj])
    if q == np.inf:
        return float(g.max())
    if q < 1:
        raise ConfigError("q must lie in [1, inf]")
    if len(ts) == 1:
        return 0.0
    dts = np.diff(ts)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0):
        raise ValueError("mixed_spacetime_norm needs uniform time sampling")
    return float(integrate.trapezoid(g**q, ts) ** (1.0 / q))


# --- energies ------------------------------------------------------------------------


class Energies(NamedTuple):
    kinetic: float
    potential: float
    total: float


def kinetic_energy(f: Field, sigma: float) -> float:
    """T = 1/2 || (-Delta)^(sigma/2) f ||^2."""
    return 0.5 * _weighted_norm(f, f.grid.k_squared() ** sigma) ** 2


def params_kernel(params) -> KernelSpec:
    method = getattr(params, "method", None)
    if method is None:
        return KernelSpec.default(params.gamma, params.alpha)
    return KernelSpec(params.gamma, params.alpha, method)


def energy_functionals(f: Field, params) -> Energies:
    """(T, V, E) with V = (mu lambda / 4) <f, (K * |f|^2) f>."""
    T = kinetic_energy(f, params.sigma)
    if params.lam == 0:
        return Energies(T, 0.0, T)
    rho = np.abs(f.values) ** 2
    pot = _convolve_array(rho, f.grid, params_kernel(params))
    V = 0.25 * params.mu * params.lam * float(np.sum(pot * rho)) * f.grid.cell_volume
    return Energies(T, V, T + V)


def gns_ratio(f: Field, params) -> float:
    """|V| / (T^(gamma/(2 sigma)) ||f||^(4 - gamma/sigma)).

    Dilation and amplitude invariant; at sigma = gamma/2 its maximum is 1/lambda_c times lambda.
    """
    T, V, _ = energy_functionals(f, params)
    if T <= 0:
        raise UndefinedRatioError("kinetic energy vanishes; ratio undefined")
    g, s = params.gamma, params.sigma
    n2 = math.sqrt(l2_mass(f))
    return abs(V) / (T ** (g / (2 * s)) * n2 ** (4 - g / s))


def dilate(f: Field, ell: float, exponent: float) -> Field:
    """Spectrally evaluated ell^exponent f(ell x) on the same grid (band-limited interpolation).

    The interpolant is periodic: for ell > 1 points with ell |x| > L pick up wrapped images.
    """
    grid = f.grid
    fh = fftn(f.values) / grid.size
    kax = grid.wavenumbers
    x = grid.axis
    # f(x) = sum_k fh(k) exp(i k (x + L)) with the grid origin at -L
    out = fh
    for ax in range(grid.dim):
        mat = np.exp(1j * np.outer(ell * x + grid.half_width, kax))
        out = np.moveaxis(np.tensordot(mat, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    return Field(grid, ell**exponent * out)
