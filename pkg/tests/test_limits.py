import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad, quad

from nilquant.errors import DegenerateInputError, ResolutionError, SupportOverflowError, WeakLimitError
from nilquant.euclid.limits import (
    Profile,
    concentration_family,
    concentration_measure,
    d_chi,
    estimate_mdm,
    estimate_sc_limit,
    gaussian_profile,
    homogeneous_cutoff_symbol,
    mdm_concentration_family,
    mdm_concentration_measure,
    mdm_oscillation_family,
    oscillation_family,
    richardson,
    sc_oracle_concentration,
    sc_oracle_oscillation,
)
from nilquant.euclid.quantize import PhaseSymbol
from nilquant.grid import GridFunction, dft, inner_product

CHI = gaussian_profile()
LADDER = [2.0**-k for k in range(3, 8)]
J_LADDER = [2**k for k in range(3, 8)]
A_CONC = PhaseSymbol(lambda x, xi: np.exp(-x * x - xi * xi), xi_radius=5.0)
A_OSC = PhaseSymbol(lambda x, xi: np.exp(-x * x - (xi - 1) ** 2), xi_radius=6.0)
ONE = PhaseSymbol(lambda x, xi: np.ones(np.broadcast(x, xi).shape))

# closed forms derived symbolically, independent of the numerical oracles
_x = sp.symbols("x", real=True)
CONC_TARGET = float(sp.exp(-sp.Rational(9, 100)) * sp.integrate(sp.exp(-_x**2 - 2 * sp.pi * _x**2), (_x, -sp.oo, sp.oo)))
OSC_TARGET = float(sp.integrate(sp.exp(-_x**2 - 2 * sp.pi * _x**2), (_x, -sp.oo, sp.oo)))
D_CHI = float(sp.integrate(sp.exp(-2 * sp.pi * _x**2), (_x, 0, sp.oo)))
NORM_SQ = float(sp.integrate(sp.exp(-2 * sp.pi * _x**2), (_x, -sp.oo, sp.oo)))


def test_symbolic_targets():
    assert CONC_TARGET == pytest.approx(0.6002, abs=1e-4)
    assert OSC_TARGET == pytest.approx(0.6568, abs=1e-4)
    assert D_CHI == pytest.approx(1 / (2 * np.sqrt(2)), rel=1e-14)


# -- families --------------------------------------------------------------------


def test_concentration_family_norms_and_shape():
    fam = concentration_family(CHI, 0.3, LADDER)
    for k in range(len(fam)):
        f = fam.member(k)
        assert f.norm() ** 2 == pytest.approx(NORM_SQ, abs=1e-6)
    fam.check_norms()
    one = concentration_family(CHI, 0.0, [1.0])
    f = one.member(0)
    assert np.allclose(f.values, np.exp(-np.pi * f.grid.axis**2))
    pair = concentration_family(CHI, 0.0, [0.5, 0.25])
    f0, f1 = pair.member(0), pair.member(1)
    assert np.abs(f1.values).max() / np.abs(f0.values).max() == pytest.approx(np.sqrt(2), rel=1e-12)
    half = lambda f: np.ptp(f.grid.axis[np.abs(f.values) > 0.5 * np.abs(f.values).max()])
    assert half(f1) / half(f0) == pytest.approx(0.5, abs=2 * f1.grid.h / half(f0) + 2 * f0.grid.h / half(f0))


def test_concentration_rejects_boundary_center():
    with pytest.raises(DegenerateInputError):
        concentration_family(CHI, 3.8, LADDER, L=4.0)


def test_oscillation_family():
    one = oscillation_family(CHI, 0.0, [1.0])
    f = one.member(0)
    assert np.allclose(f.values, np.exp(-np.pi * f.grid.axis**2))
    fam = oscillation_family(CHI, 1.0, LADDER)
    for k, eps in enumerate(LADDER):
        f = fam.member(k)
        assert f.norm() ** 2 == pytest.approx(NORM_SQ, abs=1e-10)
        assert np.allclose(np.abs(f.values), np.exp(-np.pi * f.grid.axis**2))
        F = dft(f)
        ks = F.grid.axis
        assert abs(ks[np.argmax(np.abs(F.values))] - 1.0 / eps) <= F.grid.h


def test_family_resolution_cap():
    with pytest.raises(ResolutionError):
        concentration_family(CHI, 0.0, [2.0**-20]).member(0)


def test_mdm_family_basics():
    fam = mdm_concentration_family(CHI, 0.3, [1] + J_LADDER)
    f = fam.member(0)
    assert np.allclose(f.values, np.exp(-np.pi * (f.grid.axis - 0.3) ** 2))
    for k in range(len(fam)):
        assert fam.member(k).norm() ** 2 == pytest.approx(NORM_SQ, abs=1e-8)
    last = fam.member(len(fam) - 1)
    g = GridFunction(last.grid, (last.grid.axis - 0.3) * np.exp(-last.grid.axis**2))
    assert abs(inner_product(last, g)) <= 1e-3


# -- extrapolation --------------------------------------------------------------


def test_richardson_recovers_power_law():
    eps = np.array(LADDER)
    est = richardson(eps, 0.7 + 0.3 * eps**1.5)
    assert est.converged
    assert est.rate == pytest.approx(1.5, abs=1e-10)
    assert est.limit == pytest.approx(0.7, abs=1e-12)


def test_richardson_flags_non_monotone_and_slow():
    est = richardson(LADDER, [1.0, 1.1, 0.9, 1.2, 0.8])
    assert est.verdict == "inconclusive" and est.limit is None
    eps = np.array(LADDER)
    slow = richardson(eps, 1 + eps**0.1)
    assert slow.verdict == "inconclusive"
    assert richardson(eps, np.ones(5)).limit == 1.0


# -- semiclassical limits ------------------------------------------------------


def test_concentration_limit_matches_oracle():
    est = estimate_sc_limit(concentration_family(CHI, 0.3, LADDER), A_CONC)
    assert est.converged
    assert abs(est.limit - CONC_TARGET) <= 0.02 * CONC_TARGET
    err = np.abs(est.values - CONC_TARGET)
    assert err[-1] < err[-2] < err[-3]


def test_oscillation_limit_matches_oracle():
    est = estimate_sc_limit(oscillation_family(CHI, 1.0, LADDER), A_OSC)
    assert est.converged
    assert abs(est.limit - OSC_TARGET) <= 0.02 * OSC_TARGET


def test_disjoint_support_gives_zero():
    far_x = PhaseSymbol(lambda x, xi: np.exp(-((x + 2.5) ** 2) * 8) * np.exp(-xi * xi), xi_radius=5.0)
    est = estimate_sc_limit(concentration_family(CHI, 0.3, LADDER), far_x)
    assert abs(est.values[-1]) <= 1e-3
    far_xi = PhaseSymbol(lambda x, xi: np.exp(-x * x - 8 * (xi + 1.0) ** 2), xi_radius=3.0)
    est = estimate_sc_limit(oscillation_family(CHI, 1.0, LADDER), far_xi)
    assert abs(est.values[-1]) <= 1e-3


def test_oracles_against_quadrature():
    assert sc_oracle_concentration(CHI, 0.3, A_CONC) == pytest.approx(CONC_TARGET, rel=1e-9)
    assert sc_oracle_oscillation(CHI, 1.0, A_OSC) == pytest.approx(OSC_TARGET, rel=1e-9)
    assert sc_oracle_concentration(CHI, 0.3, ONE) == pytest.approx(NORM_SQ, rel=1e-9)
    assert sc_oracle_oscillation(CHI, 1.0, ONE) == pytest.approx(NORM_SQ, rel=1e-9)
    zero_at_x0 = PhaseSymbol(lambda x, xi: (x - 0.3) * np.exp(-xi * xi))
    assert sc_oracle_concentration(CHI, 0.3, zero_at_x0) == pytest.approx(0.0, abs=1e-14)
    zero_at_xi0 = PhaseSymbol(lambda x, xi: (xi - 1.0) * np.exp(-x * x))
    assert sc_oracle_oscillation(CHI, 1.0, zero_at_xi0) == pytest.approx(0.0, abs=1e-14)
    assert concentration_measure(CHI, 0.3).total_mass() == pytest.approx(NORM_SQ, rel=1e-9)


def test_profile_without_transform_uses_quadrature():
    bare = Profile(func=CHI.func, x_radius=CHI.x_radius, xi_radius=CHI.xi_radius)
    assert sc_oracle_concentration(bare, 0.3, A_CONC) == pytest.approx(CONC_TARGET, rel=1e-7)


# -- defect measures -------------------------------------------------------------


def test_d_chi_values():
    assert d_chi(CHI, [1.0]) == pytest.approx(D_CHI, abs=1e-10)
    assert d_chi(CHI, [1.0]) == pytest.approx(d_chi(CHI, [-1.0]), abs=1e-14)
    grid_norm = concentration_family(CHI, 0.0, [1.0]).member(0).norm() ** 2
    assert d_chi(CHI, [1.0]) + d_chi(CHI, [-1.0]) == pytest.approx(grid_norm, abs=1e-6)
    atoms = mdm_concentration_measure(CHI, 0.3)
    assert atoms.total_mass() == pytest.approx(NORM_SQ, abs=1e-10)


def test_d_chi_two_dimensional():
    gauss2 = Profile(func=None, x_radius=3.0, xi_radius=2.6,
                     fourier=lambda xi: np.exp(-np.pi * np.sum(np.asarray(xi) ** 2, axis=-1)))
    # integral_0^inf exp(-2 pi r^2) r dr = 1/(4 pi)
    assert d_chi(gauss2, [0.6, 0.8]) == pytest.approx(1 / (4 * np.pi), rel=1e-10)


def test_d_chi_requires_decay():
    wide = Profile(func=CHI.func, x_radius=CHI.x_radius, xi_radius=1.0, fourier=CHI.fourier)
    with pytest.raises(ResolutionError):
        d_chi(wide, [1.0])


def test_homogeneous_cutoff_symbol():
    a = homogeneous_cutoff_symbol(lambda x, w: np.ones_like(x * w), 1.5)
    xi = np.linspace(3.0, 40.0, 50)
    assert np.all(a(0.2, xi) == 1.0) and np.all(a(0.2, -xi) == 1.0)
    assert np.all(a(0.2, np.linspace(-1.5, 1.5, 9)) == 0.0)
    b = homogeneous_cutoff_symbol(lambda x, w: np.cos(x) * (1 + w), 1.5)
    assert np.allclose(b(0.7, xi), b(0.7, 2 * xi))
    c = homogeneous_cutoff_symbol(lambda x, w: w[..., 0] + 0 * x, 1.0, dim=2)
    pts = np.array([[3.0, 1.0], [-2.5, 4.0], [0.5, -6.0]])
    assert np.allclose(c(0.0, pts), -c(0.0, -pts))
    grid = concentration_family(CHI, 0.0, [1.0]).member(0).grid
    with pytest.raises(SupportOverflowError):
        homogeneous_cutoff_symbol(lambda x, w: 1.0, grid.dual().L, grid=grid)


def test_mdm_concentration_example():
    b = lambda x: np.exp(-x * x)
    c = lambda w: 1 + 0.5 * w
    est = estimate_mdm(mdm_concentration_family(CHI, 0.3, J_LADDER), lambda x, w: b(x) * c(w))
    target = b(0.3) * (c(1.0) + c(-1.0)) * D_CHI
    assert abs(est.best - target) <= 0.03 * target
    assert est.details["cutoff_spread"] <= 0.02


def test_mdm_oscillation_example():
    a0 = lambda x, w: np.exp(-x * x) * (w > 0)
    est = estimate_mdm(mdm_oscillation_family(CHI, 1.0, J_LADDER), a0)
    target = quad(lambda x: np.exp(-x * x) * np.exp(-2 * np.pi * x * x), -np.inf, np.inf)[0]
    assert abs(est.best - target) <= 0.02 * target


def test_mdm_total_mass():
    est = estimate_mdm(mdm_concentration_family(CHI, 0.3, J_LADDER), lambda x, w: np.ones_like(x * w))
    assert abs(est.best - NORM_SQ) <= 0.03 * NORM_SQ
    # every rung obeys the bound; the single-power extrapolation of a
    # 1/j + O(1/j^3) sequence overshoots slightly
    assert np.all(est.values.real <= NORM_SQ + 1e-6)
    assert est.best.real <= NORM_SQ + 1e-3


def test_mdm_rejects_non_null_family():
    with pytest.raises(WeakLimitError):
        estimate_mdm(mdm_oscillation_family(CHI, 0.0, J_LADDER), lambda x, w: np.ones_like(x * w))


# -- properties -------------------------------------------------------------------

profiles = st.floats(0.6, 1.6)
centers = st.floats(-0.5, 0.5)


@settings(max_examples=12, deadline=None)
@given(w=profiles, x0=centers, s=st.floats(-1.0, 1.0))
def test_linearity_per_rung(w, x0, s):
    chi = gaussian_profile(w)
    fam = concentration_family(chi, x0, LADDER[:3])
    a2 = PhaseSymbol(lambda x, xi: np.cos(x + s) * np.exp(-((xi - s) ** 2)), xi_radius=5.0)
    e1 = estimate_sc_limit(fam, A_CONC)
    e2 = estimate_sc_limit(fam, a2)
    e12 = estimate_sc_limit(fam, A_CONC + a2)
    assert np.max(np.abs(e12.values - e1.values - e2.values)) <= 1e-10


@settings(max_examples=8, deadline=None)
@given(w=profiles, x0=centers, c=st.floats(-1.0, 1.0))
def test_positivity_and_mass_bound(w, x0, c):
    chi = gaussian_profile(w)
    fam = concentration_family(chi, x0, LADDER)
    pos = PhaseSymbol(lambda x, xi: np.exp(-((x - c) ** 2) - 2 * (xi - c) ** 2), xi_radius=5.0)
    assert estimate_sc_limit(fam, pos).best.real >= -1e-6
    mass = estimate_sc_limit(fam, ONE)
    assert mass.best.real <= max(fam.norms()) ** 2 + 1e-6


@settings(max_examples=20, deadline=None)
@given(w=st.floats(0.3, 3.0))
def test_polar_identity(w):
    chi = gaussian_profile(w)
    total = quad(lambda x: chi(x) ** 2, -np.inf, np.inf, epsabs=1e-13)[0]
    assert d_chi(chi, [1.0]) + d_chi(chi, [-1.0]) == pytest.approx(total, abs=1e-6)


def test_matrix_element_oracle_for_family_member():
    # one rung of the concentration family against a direct double integral
    fam = concentration_family(CHI, 0.3, [0.5])
    est_val = estimate_sc_limit(concentration_family(CHI, 0.3, [0.5, 0.5, 0.5]), A_CONC).values[0]

    def part(k):
        def fn(xi, x):
            fx = np.sqrt(2) * np.exp(-np.pi * 4 * (x - 0.3) ** 2)
            fh = np.sqrt(0.5) * np.exp(-np.pi * (xi / 2) ** 2) * np.exp(-2j * np.pi * 0.3 * xi)
            v = np.exp(2j * np.pi * x * xi) * np.exp(-x * x - (0.5 * xi) ** 2) * fh * fx
            return v.real if k == 0 else v.imag
        return dblquad(fn, -3, 3, -12, 12, epsabs=1e-12)[0]

    assert est_val == pytest.approx(complex(part(0), part(1)), abs=1e-8)
    assert len(fam) == 1
