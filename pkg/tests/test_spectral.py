import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fhartree import spectral as sp
from fhartree.checks import radial_riesz_quadrature
from fhartree.dynamics import HartreeParams, free_evolution
from fhartree.errors import CapacityError, ConfigError, UndefinedRatioError
from fhartree.spectral import Field, Grid, KernelSpec, SobolevIndex


def density(f):
    return f.with_values(np.abs(f.values) ** 2)


def test_grid_duality():
    g = Grid(1, 16, 3.0)
    assert g.spacing * g.points == pytest.approx(2 * g.half_width)
    assert np.allclose(np.sort(g.wavenumbers), np.pi * np.arange(-8, 8) / 3.0)
    # e^{i k_m x} transforms to a single spike
    for m in (-3, 0, 5):
        f = sp.plane_wave(g, (m,))
        spec = np.abs(np.fft.fft(f.values))
        assert np.count_nonzero(spec > 1e-9) == 1


def test_grid_rejects_bad_sizes():
    with pytest.raises(ConfigError):
        Grid(3, 7, 1.0)
    with pytest.raises(ConfigError):
        Grid(4, 8, 1.0)


def test_frac_laplacian_constant_and_mode():
    g = Grid(2, 16, 4.0)
    c = Field(g, np.full(g.shape, 2.5 + 0j))
    assert np.max(np.abs(sp.frac_laplacian_apply(c, 0.5).values)) < 1e-13
    f = sp.plane_wave(g, (2, -3))
    k2 = (np.pi / 4.0) ** 2 * (4 + 9)
    out = sp.frac_laplacian_apply(f, 0.7)
    assert np.allclose(out.values, k2**0.7 * f.values, atol=1e-12)


def test_frac_laplacian_rejects_nonfinite():
    g = Grid(1, 8, 1.0)
    v = np.zeros(8, complex)
    v[3] = np.nan
    with pytest.raises(ValueError):
        sp.frac_laplacian_apply(Field(g, v), 0.5)


def test_laplacian_against_finite_differences():
    g = Grid(1, 256, 16.0)
    f = sp.gaussian(g, 1.0)
    lap = sp.frac_laplacian_apply(f, 1.0).values
    u, h = f.values, g.spacing
    fd = -(-np.roll(u, 2) + 16 * np.roll(u, 1) - 30 * u + 16 * np.roll(u, -1) - np.roll(u, -2)) / (12 * h * h)
    assert np.max(np.abs(lap - fd)) / np.max(np.abs(fd)) < 1e-4


@given(s1=st.floats(0.05, 0.5), s2=st.floats(0.05, 0.5), seed=st.integers(0, 2**16))
def test_frac_laplacian_semigroup(s1, s2, seed):
    g = Grid(1, 32, 5.0)
    rng = np.random.default_rng(seed)
    modes = rng.integers(-6, 7, size=4)
    f = sum((sp.plane_wave(g, (int(m),), complex(*rng.standard_normal(2))) for m in modes),
            Field(g, np.zeros(32, complex)))
    a = sp.frac_laplacian_apply(sp.frac_laplacian_apply(f, s1), s2).values
    b = sp.frac_laplacian_apply(f, s1 + s2).values
    assert np.max(np.abs(a - b)) <= 1e-10 * max(1.0, np.max(np.abs(b)))


def test_sobolev_weight_examples():
    g = Grid(1, 32, 5.0)
    f = sp.gaussian(g, 1.0)
    same = sp.sobolev_weight_apply(f, SobolevIndex(0.0, 0.5, "operator_weight"))
    assert np.allclose(same.values, f.values, atol=1e-14)
    mode = sp.plane_wave(g, (3,))
    k = 3 * np.pi / 5
    out = sp.sobolev_weight_apply(mode, SobolevIndex(1.5, 0.5, "operator_weight"))
    assert np.allclose(out.values, (1 + k) ** 0.75 * mode.values, atol=1e-12)
    back = sp.sobolev_weight_apply(sp.sobolev_weight_apply(f, SobolevIndex(2.0)), SobolevIndex(-2.0))
    assert np.max(np.abs(back.values - f.values)) / np.max(np.abs(f.values)) < 1e-12


def test_riesz_constant_values():
    assert sp.riesz_constant(3, 1.0) == pytest.approx(4 * np.pi)
    assert sp.riesz_constant(3, 2.0) == pytest.approx(2 * np.pi**2)
    # |x|^-1/2 is its own Fourier transform up to sqrt(2 pi) in 1D
    assert sp.riesz_constant(1, 0.5) == pytest.approx(math.sqrt(2 * np.pi))


def test_riesz_zero_and_even():
    g = Grid(3, 16, 6.0)
    zero = Field(g, np.zeros(g.shape))
    assert np.all(sp.riesz_convolve(zero, KernelSpec(1.0)).values == 0)
    rho = density(sp.gaussian(g, 1.0, center=(0.5, 0, 0)) + sp.gaussian(g, 1.0, center=(-0.5, 0, 0)))
    out = sp.riesz_convolve(rho, KernelSpec(1.0)).values
    # reflection x -> -x maps index i to (-i) mod M about the origin index M/2
    flipped = np.roll(out[::-1], 1, axis=0)
    assert np.max(np.abs(out - flipped)) < 1e-10 * np.max(np.abs(out))


@pytest.mark.parametrize("gamma", [0.5, 1.0, 1.4])
def test_riesz_matches_radial_quadrature(gamma):
    g = Grid(3, 64, 12.0)
    rho = density(sp.gaussian(g, 1.0))
    pot = sp.riesz_convolve(rho, KernelSpec(gamma)).values.real
    c, h = 32, g.spacing
    norm = math.pi**1.5
    for i in (0, 2, 5, 9, 14):
        ref = radial_riesz_quadrature(lambda s: math.exp(-s * s) / norm, gamma, i * h)
        assert abs(pot[c + i, c, c] - ref) / ref < 1e-3


def test_untruncated_symbol_zero_mode_gauge():
    # the bare Riesz symbol differs from the truncated one mainly by a constant
    g = Grid(3, 32, 10.0)
    rho = density(sp.gaussian(g, 1.0))
    a = sp.riesz_convolve(rho, KernelSpec(1.0)).values.real
    b = sp.riesz_convolve(rho, KernelSpec(1.0, truncate=False)).values.real
    core = g.radius() < 2.5
    shift = (a - b)[core]
    assert np.ptp(shift) < 0.05 * np.max(np.abs(a))


def test_riesz_rejects_nonintegrable():
    g = Grid(1, 16, 4.0)
    rho = density(sp.gaussian(g, 1.0))
    with pytest.raises(ConfigError):
        sp.riesz_convolve(rho, KernelSpec(1.2))
    with pytest.raises(ConfigError):
        sp.riesz_convolve(rho, KernelSpec(1.0, 0.3))
    out = sp.regularized_convolve(rho, KernelSpec(1.2, 0.3))
    assert np.all(np.isfinite(out.values))


def test_regularized_single_cell_reproduces_kernel():
    g = Grid(3, 16, 4.0)
    v = np.zeros(g.shape)
    w = 2.0
    v[8, 8, 8] = w / g.cell_volume
    out = sp.regularized_convolve(Field(g, v), KernelSpec.default(1.0, 0.2)).values
    r = g.radius()
    exact = w / (r + 0.2)
    mask = r > g.spacing
    assert np.max(np.abs(out - exact)[mask] / exact[mask]) < 5e-2


def test_regularized_kernel_bounds():
    g = Grid(3, 16, 6.0)
    rho = density(sp.gaussian(g, 1.3))
    mass = float(np.sum(rho.values.real)) * g.cell_volume
    for alpha in (0.1, 1.0):
        out = sp.regularized_convolve(rho, KernelSpec.default(1.0, alpha)).values
        assert out.max() <= mass / alpha * (1 + 1e-12)
    big = sp.regularized_convolve(rho, KernelSpec.default(1.0, 1e6)).values
    assert np.allclose(big * 1e6, mass, rtol=1e-4)


def test_riesz_regularized_converge_as_alpha_shrinks():
    g = Grid(3, 64, 6.0)
    rho = density(sp.gaussian(g, 1.0))
    ref = sp.riesz_convolve(rho, KernelSpec(1.0)).values.real
    mask = (g.radius() > g.spacing) & (g.radius() < 3.0)
    alphas = (0.4, 0.2, 0.1)
    diffs = []
    for alpha in alphas:
        out = sp.regularized_convolve(rho, KernelSpec(1.0, alpha)).values.real
        diffs.append(np.max(np.abs(out - ref)[mask]))
    assert diffs[0] > diffs[1] > diffs[2]
    ratios = [d / a for d, a in zip(diffs, alphas)]
    assert max(ratios) < 2 * min(ratios)


def test_origin_cell_average_matches_quadrature():
    # int_[0,1]^3 1/r = 3/2 log((sqrt3 + 1)/(sqrt3 - 1)) - pi/4, then rescale to side h
    h = 0.3
    unit = 1.5 * math.log((math.sqrt(3) + 1) / (math.sqrt(3) - 1)) - math.pi / 4
    ref = 8 * (h / 2) ** 2 * unit / h**3
    assert sp.origin_cell_average(3, 1.0, h) == pytest.approx(ref, rel=1e-6)
    assert sp.origin_cell_average(1, 0.5, h) == pytest.approx(2 * (h / 2) ** 0.5 / 0.5 / h)


def test_padded_capacity_error():
    g = Grid(3, 512, 10.0)
    with pytest.raises(CapacityError):
        sp.padded_kernel_hat(g, KernelSpec(1.0, 0.5, "padded_real_kernel"))


def test_norm_examples():
    g = Grid(3, 32, 10.0)
    f = sp.gaussian(g, 1.0)
    assert sp.l2_mass(f) == pytest.approx(1.0, abs=1e-6)
    assert sp.sobolev_norm(f, 0.0) ** 2 == pytest.approx(sp.l2_mass(f), rel=1e-12)
    mode = sp.plane_wave(Grid(1, 16, 2.0), (3,), amplitude=0.7)
    assert sp.lp_norm(mode, np.inf) == pytest.approx(0.7)
    assert sp.lp_norm(mode, 2) ** 2 == pytest.approx(sp.l2_mass(mode))


@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 3))
def test_parseval(seed, dim):
    g = Grid(dim, 8, 2.0)
    rng = np.random.default_rng(seed)
    f = Field(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    assert sp.l2_mass_fourier(f) == pytest.approx(sp.l2_mass(f), rel=1e-12)


def test_homogeneous_scaling_invariance():
    # critical index s_c = gamma/2 - sigma for phi_l(x) = l^((d - gamma)/2 + sigma) phi(l x)
    g = Grid(3, 64, 10.0)
    f = sp.gaussian(g, 1.0)
    gamma, sigma, ell = 1.0, 0.25, 0.6
    sc = gamma / 2 - sigma
    fl = sp.dilate(f, ell, (3 - gamma) / 2 + sigma)
    a = sp.homogeneous_sobolev_norm(f, sc)
    b = sp.homogeneous_sobolev_norm(fl, sc)
    assert abs(a - b) / a < 1e-2


def test_dilate_matches_analytic_gaussian():
    g = Grid(1, 64, 10.0)
    f = sp.gaussian(g, 1.0, normalize=False)
    out = sp.dilate(f, 1.5, 0.5)
    x = g.axis
    # the grid is periodic, so only points with 1.5 |x| < L are free of wrapped images
    inside = np.abs(1.5 * x) < 9.0
    assert np.allclose(out.values[inside], 1.5**0.5 * np.exp(-(1.5 * x[inside]) ** 2 / 2), atol=1e-10)


def test_mixed_norm_examples():
    g = Grid(1, 32, 8.0)
    f = sp.gaussian(g, 1.0)
    traj = [(t, f) for t in np.linspace(0, 2, 5)]
    w = sp.sobolev_lp_norm(f, 0.5, 4.0)
    assert sp.mixed_spacetime_norm(traj, 1, (0.5, 4.0)) == pytest.approx(2 * w)
    assert sp.mixed_spacetime_norm(traj, np.inf, (0.5, 4.0)) == pytest.approx(w)
    with pytest.raises(ValueError):
        sp.mixed_spacetime_norm([], 2)


def test_mixed_norm_self_convergence():
    g = Grid(3, 32, 10.0)
    f = sp.gaussian(g, 1.0)

    def norm(n):
        ts = np.linspace(0, 1, n + 1)
        return sp.mixed_spacetime_norm([(t, free_evolution(f, 0.5, t)) for t in ts], 3, (0.0, 6.0))

    coarse, fine = norm(5), norm(20)
    assert np.isfinite(coarse) and abs(coarse - fine) / fine < 0.1


def test_energy_examples():
    g = Grid(1, 16, 3.0)
    mode = sp.plane_wave(g, (2,), 0.5)
    p = HartreeParams(0.8, 0.6, 1, 1.0)
    e = sp.energy_functionals(mode, p.replace(lam=0.0))
    assert e.potential == 0 and e.total == e.kinetic
    k = 2 * np.pi / 3
    assert e.kinetic == pytest.approx(0.5 * k**1.2 * sp.l2_mass(mode))


def test_coulomb_energy_of_gaussian():
    # rho = pi^-1.5 exp(-r^2): x - y has unit variance per axis, E|Z|^-1 = sqrt(2/pi)
    g = Grid(3, 48, 10.0)
    f = sp.gaussian(g, 1.0)
    p = HartreeParams(1.0, 1.0, 1, 2.0)
    V = sp.energy_functionals(f, p).potential
    assert V == pytest.approx(2.0 / 4 * math.sqrt(2 / math.pi), rel=1e-2)


def test_gns_ratio_properties():
    g = Grid(3, 64, 12.0)
    f = sp.gaussian(g, 1.2)
    p = HartreeParams(1.0, 0.5, -1, 1.0)
    r1 = sp.gns_ratio(f, p)
    assert sp.gns_ratio(f, p.replace(lam=2.0)) == pytest.approx(2 * r1, rel=1e-12)
    fl = sp.dilate(f, 1.5, 1.5)
    assert sp.gns_ratio(fl, p) == pytest.approx(r1, rel=1e-2)
    const = Field(Grid(3, 8, 2.0), np.ones((8, 8, 8), complex))
    with pytest.raises(UndefinedRatioError):
        sp.gns_ratio(const, p)


def test_operations_are_deterministic():
    g = Grid(3, 16, 6.0)
    rho = density(sp.gaussian(g, 1.0))
    a = sp.convolve(rho, KernelSpec(1.0)).values
    b = sp.convolve(rho, KernelSpec(1.0)).values
    assert a.tobytes() == b.tobytes()
