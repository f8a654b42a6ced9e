import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heisenberg_fixtures import CALIBRATION, HELDOUT, PLANCHEREL_GRID, gaussian, separable
from nilquant.errors import CalibrationError, DegenerateInputError, GridMismatchError
from nilquant.grid import Grid
from nilquant.group_quantize import (
    GroupFamily,
    KernelField,
    a0_seminorm,
    apply_via_kernels,
    concentration_family,
    dilate_symbol,
    estimate_group_sc_limit,
    gram_field,
    homogeneous_cutoff,
    homogeneous_norm,
    identity_symbol,
    kernel_concentration_check,
    kernel_from_symbol,
    op_apply,
    op_norm_bound_check,
    symbol_from_kernel,
)
from nilquant.heisenberg.fourier import DualGridMeasure, dual_measure
from nilquant.heisenberg.group import HeisenbergElement, HGroupFunction, convolve, mollified_delta
from nilquant.ovmeasure import is_positive

GOLDEN = Path(__file__).parent / "golden"
PLANCHEREL_C = json.loads((GOLDEN / "plancherel.json").read_text())["c"]
CONCENTRATION = json.loads((GOLDEN / "kernel_concentration.json").read_text())
DILATION = json.loads((GOLDEN / "dilation_compatibility.json").read_text())

GRID = PLANCHEREL_GRID
ANCHOR = HeisenbergElement(0.3, -0.2, 0.1)


def calibrated(lam_max=8.0):
    return dual_measure(GRID, 1 / 8, lam_max).with_constant(PLANCHEREL_C)


def bump(x, y, t):
    return np.exp(-(x * x + y * y) / 4 - t * t / 4)


def gaussian_kernel(grid, sx, sy, w, odd=False):
    def func(x, y, t):
        core = np.exp(-np.pi * (x * x / sx**2 + y * y / sy**2) - np.pi * t * t / w**2)
        return core * t if odd else core

    return HGroupFunction.sample(grid, func)


def rel(a, b):
    return (a - b).norm() / b.norm()


@pytest.fixture(scope="module")
def dual():
    return calibrated()


@pytest.fixture(scope="module")
def odd_f():
    return separable(HELDOUT[0])


@pytest.fixture(scope="module")
def identity_result(dual, odd_f):
    return op_apply(identity_symbol(GRID, dual), odd_f)


@pytest.fixture(scope="module")
def conv_kernel():
    return gaussian(GRID, s=0.7, w=0.7)


@pytest.fixture(scope="module")
def conv_result(dual, odd_f, conv_kernel):
    return op_apply(symbol_from_kernel(KernelField.constant(conv_kernel), dual), odd_f)


# -- kernel and symbol ---------------------------------------------------------------


@pytest.fixture(scope="module")
def fine_setting():
    grid = Grid(3, 0.12, 32)
    nodes = np.array([-1.0, 1.0])
    dual = DualGridMeasure(nodes, np.abs(nodes), 1.0, 0.5, 2.0, PLANCHEREL_C)
    return grid, dual


def test_symbol_of_mollified_delta_is_identity(fine_setting):
    grid, dual = fine_setting
    sigma = symbol_from_kernel(KernelField.constant(mollified_delta(grid, 0.02)), dual, tail_tol=None)
    for lam in (-1.0, 1.0):
        block = sigma.at(HeisenbergElement(), lam)[:8, :8]
        assert np.abs(block - np.eye(8)).max() <= 1e-3


def test_x_independent_kernel_gives_x_independent_symbol(fine_setting):
    grid, dual = fine_setting
    sigma = symbol_from_kernel(KernelField.constant(mollified_delta(grid, 0.03)), dual, tail_tol=None)
    a = sigma.at(HeisenbergElement(), 1.0)
    b = sigma.at(HeisenbergElement(0.05, -0.02, 0.01), 1.0)
    np.testing.assert_array_equal(a, b)


def test_symbol_from_kernel_is_linear(fine_setting):
    grid, dual = fine_setting
    k1, k2 = mollified_delta(grid, 0.02), mollified_delta(grid, 0.03)
    combo = symbol_from_kernel(KernelField.constant(k1 + k2 * 2j), dual, tail_tol=None)
    s1 = symbol_from_kernel(KernelField.constant(k1), dual, tail_tol=None)
    s2 = symbol_from_kernel(KernelField.constant(k2), dual, tail_tol=None)
    x = HeisenbergElement()
    expected = s1.at(x, 1.0) + 2j * s2.at(x, 1.0)
    assert np.abs(combo.at(x, 1.0) - expected).max() <= 1e-12 * np.abs(expected).max()


def test_kernel_symbol_round_trip(dual):
    kernel = gaussian_kernel(GRID, 1.0, 1.2, 2.5, odd=True)
    sigma = symbol_from_kernel(KernelField.constant(kernel), dual, tail_tol=1e-6)
    back = kernel_from_symbol(sigma).components[0].kernel
    assert rel(back, kernel) <= 1e-6
    again = symbol_from_kernel(KernelField.constant(back), dual, tail_tol=1e-6)
    num = den = 0.0
    for lam, w in zip(dual.nodes, dual.weights):
        a, b = sigma.fourier[0][float(lam)], again.fourier[0][float(lam)]
        M = min(a.M, b.M)
        num += w * np.linalg.norm(a.matrix[:M, :M] - b.matrix[:M, :M]) ** 2
        den += w * a.hs_norm() ** 2
    assert np.sqrt(num / den) <= 1e-6


def test_kernel_of_identity_symbol_is_a_delta(dual):
    kernel = kernel_from_symbol(identity_symbol(GRID, dual)).components[0].kernel
    vals = np.abs(kernel.values)
    centre = tuple(n // 2 for n in GRID.shape)
    assert np.unravel_index(np.argmax(vals), vals.shape) == centre
    # the origin's neighbourhood carries the peak; far from the t-axis it has decayed
    x, y, _ = GRID.mesh()
    assert vals[(np.abs(x) > 1.5) | (np.abs(y) > 1.5)].max() <= 1e-2 * vals.max()


def test_symbol_needs_calibrated_measure():
    kernel = gaussian(GRID)
    with pytest.raises(CalibrationError):
        symbol_from_kernel(KernelField.constant(kernel), dual_measure(GRID))


# -- applying the quantization -------------------------------------------------------


def test_identity_symbol_reproduces_function(identity_result, odd_f):
    error = rel(identity_result.value, odd_f)
    assert error <= 1e-2
    report = identity_result.truncation
    assert error <= 2 * report["estimate"]
    assert report["extra_nodes"] > 0


def test_identity_error_is_the_reported_deficit(dual):
    f = gaussian(GRID, w=1.0)
    result = op_apply(identity_symbol(GRID, dual), f)
    error = rel(result.value, f)
    # the t-mean of an even profile lies outside every dual window
    assert error > 0.1
    assert result.truncation["plancherel_deficit"] == pytest.approx(error, rel=1e-3)


def test_truncation_estimate_shrinks_as_window_widens(identity_result, odd_f):
    estimates = []
    for lam_max in (2.0, 4.0):
        result = op_apply(identity_symbol(GRID, calibrated(lam_max)), odd_f)
        estimates.append(result.truncation["estimate"])
    estimates.append(identity_result.truncation["estimate"])
    assert estimates[0] > estimates[1] > estimates[2]


def test_max_error_is_enforced(dual):
    with pytest.raises(CalibrationError):
        op_apply(identity_symbol(GRID, dual), gaussian(GRID, w=1.0), max_error=1e-2)


def test_scalar_symbol_multiplies(dual, odd_f, identity_result):
    result = op_apply(identity_symbol(GRID, dual, bump), odd_f)
    weight = HGroupFunction.sample(GRID, bump).values
    expected = HGroupFunction(GRID, weight * odd_f.values)
    assert rel(result.value, expected) <= 1e-2
    exact = HGroupFunction(GRID, weight * identity_result.value.values)
    assert rel(result.value, exact) <= 1e-12


def test_x_independent_symbol_is_convolution(conv_result, odd_f, conv_kernel):
    assert rel(conv_result.value, convolve(odd_f, conv_kernel)) <= 1e-3


def test_op_apply_is_linear(dual, odd_f, conv_kernel, identity_result, conv_result):
    field = KernelField.separable([(lambda x, y, t: np.ones_like(x), None), (lambda x, y, t: 2j * np.ones_like(x),
                                                                               conv_kernel)])
    combo = op_apply(symbol_from_kernel(field, dual), odd_f).value
    expected = identity_result.value + conv_result.value * 2j
    assert rel(combo, expected) <= 1e-12
    g = separable(HELDOUT[1])
    sigma = identity_symbol(GRID, dual)
    # adaptive truncation depends on f; linearity holds for a common one
    modes = identity_result.truncation["modes"]
    scaled = op_apply(sigma, odd_f * 3.0 + g * 1j, modes=modes).value
    expected = identity_result.value * 3.0 + op_apply(sigma, g, modes=modes).value * 1j
    assert rel(scaled, expected) <= 1e-12


def test_op_apply_grid_mismatch(dual):
    with pytest.raises(GridMismatchError):
        op_apply(identity_symbol(GRID, dual), gaussian(Grid(3, 6.0, 32)))


# -- semiclassical dilation ------------------------------------------------------------


@pytest.fixture(scope="module")
def wide_symbol(dual):
    return symbol_from_kernel(KernelField.constant(_dilated_wide(1.0)), dual)


def _dilated_wide(r):
    """``r^Q kappa(dilate(r, .))`` for a kernel of widths (2, 2, 2) odd in t."""

    def func(x, y, t):
        x, y, t = r * x, r * y, r * r * t
        return r**4 * np.exp(-np.pi * (x * x + y * y) / 4 - np.pi * t * t / 4) * t

    return HGroupFunction.sample(GRID, func)


def test_dilation_by_one_is_identity(wide_symbol):
    assert dilate_symbol(wide_symbol, 1.0) is wide_symbol


def test_dilated_symbol_matches_dilated_kernel(wide_symbol, dual):
    eps = 0.5
    dilated = dilate_symbol(wide_symbol, eps)
    sampled = symbol_from_kernel(KernelField.constant(_dilated_wide(1 / eps)), dual)
    x = HeisenbergElement()
    for lam in dual.nodes:
        a = dilated.at(x, float(lam))[:8, :8]
        b = sampled.at(x, float(lam))[:8, :8]
        assert np.abs(a - b).max() <= 1e-4 * np.abs(b).max()


def test_dilations_compose(wide_symbol):
    twice = dilate_symbol(dilate_symbol(wide_symbol, 0.8), 0.75)
    once = dilate_symbol(wide_symbol, 0.6)
    assert twice.scale == pytest.approx(0.6, rel=1e-15)
    x = HeisenbergElement()
    for lam in twice.dual.nodes[::5]:
        a, b = twice.at(x, float(lam)), once.at(x, float(lam))
        assert np.abs(a - b).max() <= 1e-12 * np.abs(b).max()


def test_dilation_below_window_is_refused(wide_symbol):
    with pytest.raises(CalibrationError, match="lam_min"):
        dilate_symbol(wide_symbol, 0.3)
    with pytest.raises(CalibrationError):
        dilate_symbol(wide_symbol, 1.5)
    with pytest.raises(ValueError):
        dilate_symbol(wide_symbol, 0.0)


def test_dilation_compatibility_golden(dual):
    eps = DILATION["eps"]
    kernel = gaussian(GRID, s=1.0, w=1.0)
    f, g = separable(DILATION["f"]), separable(DILATION["g"])
    sigma = dilate_symbol(symbol_from_kernel(KernelField.constant(kernel), dual), eps)
    fourier_path = np.sum(op_apply(sigma, f).value.values * np.conj(g.values)) * GRID.cell
    # (Op^eps f) o dilate(eps) = Op(sigma)(f o dilate(eps)) and the volume changes by eps^Q
    fe, ge = separable(DILATION["f"], r=eps), separable(DILATION["g"], r=eps)
    kernel_path = eps**4 * np.sum(convolve(fe, kernel).values * np.conj(ge.values)) * GRID.cell
    assert abs(fourier_path - kernel_path) <= 1e-4 * abs(kernel_path)
    assert kernel_path.real == pytest.approx(DILATION["value"], rel=DILATION["relative_tolerance"])


# -- A0 seminorm and the norm bound ------------------------------------------------------

SMALL = Grid(3, 4.0, 64)


def test_seminorm_of_mollifier_is_one():
    assert a0_seminorm(KernelField.constant(mollified_delta(SMALL, 0.4))) == pytest.approx(1.0, abs=1e-12)
    assert a0_seminorm(KernelField.identity(SMALL)) == 1.0


def test_seminorm_is_dilation_invariant():
    kernel = gaussian(SMALL)
    narrow = HGroupFunction.sample(SMALL, lambda x, y, t: 16 * np.exp(-4 * np.pi * (x * x + y * y) - 16 * np.pi * t * t))
    assert a0_seminorm(KernelField.constant(narrow)) == pytest.approx(a0_seminorm(KernelField.constant(kernel)),
                                                                      rel=1e-4)


def test_seminorm_of_dilated_symbol_is_unchanged(wide_symbol):
    assert a0_seminorm(dilate_symbol(wide_symbol, 0.5)) == a0_seminorm(wide_symbol)


TINY = Grid(3, 3.0, 16)


def random_field(rng):
    def amp(cx, s):
        return lambda x, y, t: np.exp(-((x - cx) ** 2 + y * y + t * t) / s)

    pairs = []
    for _ in range(int(rng.integers(1, 3))):
        c = rng.uniform(-1, 1, 3)
        k = gaussian(TINY, c[0], c[1], c[2], rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5))
        pairs.append((amp(rng.uniform(-1, 1), rng.uniform(1, 4)), k * complex(*rng.normal(size=2))))
    return pairs


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_seminorm_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    p1, p2 = random_field(rng), random_field(rng)
    n1 = a0_seminorm(KernelField.separable(p1))
    n2 = a0_seminorm(KernelField.separable(p2))
    n12 = a0_seminorm(KernelField.separable(p1 + p2))
    assert n12 <= n1 + n2 + 1e-12 * (n1 + n2)


NORM_GRID = Grid(3, 4.0, 48)


def norm_gaussian(cx, cy, ct, s, w):
    return gaussian(NORM_GRID, cx, cy, ct, s, w)


def test_norm_bound_identity_variant():
    probes = [norm_gaussian(0.3, 0, 0, 0.8, 0.8), norm_gaussian(0, -0.5, 0.2, 0.6, 0.7)]
    report = op_norm_bound_check(KernelField.identity(NORM_GRID), 1.0, probes)
    assert report.ratios == pytest.approx([1.0, 1.0], rel=1e-12)
    assert report.passed


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.25])
def test_norm_bound_holds(eps):
    field = KernelField.separable([
        (lambda x, y, t: np.exp(-(x * x + y * y + t * t) / 8), norm_gaussian(0.2, 0, 0, 0.5, 0.5)),
        (lambda x, y, t: np.cos(x) * np.exp(-y * y / 4), norm_gaussian(-0.3, 0.2, 0.1, 0.6, 0.5) * 0.5j),
    ])
    probes = [norm_gaussian(0.5, -0.3, 0.2, 0.8, 0.8), norm_gaussian(-0.4, 0.6, -0.3, 0.5, 0.6),
              norm_gaussian(0, 0, 0, 1.0, 1.0)]
    report = op_norm_bound_check(field, eps, probes, power_steps=6)
    assert report.passed, report
    # power iteration pushes towards the norm
    assert report.power_ratio >= max(report.ratios)


def test_norm_bound_rejects_empty_probes():
    with pytest.raises(DegenerateInputError):
        op_norm_bound_check(KernelField.identity(NORM_GRID), 1.0, [])


# -- kernel concentration ------------------------------------------------------------------


def test_gaussian_kernel_concentrates_super_polynomially():
    kernel = gaussian(SMALL)
    report = kernel_concentration_check(KernelField.constant(kernel), CONCENTRATION["eps"],
                                        homogeneous_cutoff(CONCENTRATION["radius"]))
    np.testing.assert_allclose(report.residuals, CONCENTRATION["residuals"], rtol=CONCENTRATION["relative_tolerance"])
    assert np.all(np.diff(report.exponents) > 0)
    assert report.final_exponent >= 2
    assert report.residuals[2] < report.residuals[1]


def test_compact_kernel_inside_cutoff_has_zero_residual():
    grid = Grid(3, 3.0, 32)

    def compact(x, y, t):
        s = np.clip(homogeneous_norm(x, y, t) / 0.9, 0, 1)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(s < 1, np.exp(-1 / np.maximum(1 - s**4, 1e-300)), 0.0)

    kernel = HGroupFunction.sample(grid, compact)
    report = kernel_concentration_check(KernelField.constant(kernel), [1.0, 0.5, 0.25], homogeneous_cutoff(1.0))
    assert np.all(report.residuals == 0.0)


def test_concentration_ladder_must_decrease():
    with pytest.raises(ValueError):
        kernel_concentration_check(KernelField.constant(gaussian(TINY)), [0.25, 0.5], homogeneous_cutoff(0.5))


def test_cutoff_is_one_near_origin():
    chi = homogeneous_cutoff(0.5)
    assert chi(0.1, 0.1, 0.01) == 1.0 and chi(3.0, 0.0, 0.0) == 0.0
    # homogeneous gauge: degree one under dilation
    assert homogeneous_norm(2 * 0.3, 2 * 0.4, 4 * 0.1) == pytest.approx(2 * homogeneous_norm(0.3, 0.4, 0.1))


# -- semiclassical limits --------------------------------------------------------------------

LADDER = [2.0**-k for k in range(1, 6)]


@pytest.fixture(scope="module")
def profile():
    return separable(CALIBRATION[1])


def test_identity_limit_is_the_mass(dual, profile):
    result = estimate_group_sc_limit(concentration_family(profile, ANCHOR, LADDER), identity_symbol(GRID, dual))
    assert result.estimate.limit == pytest.approx(profile.norm() ** 2, rel=1e-12)
    assert result.oracle == pytest.approx(profile.norm() ** 2, rel=1e-12)


def test_band_disjoint_kernel_has_zero_limit(dual):
    F = HGroupFunction.sample(GRID, lambda x, y, t: np.exp(-np.pi * (x * x + y * y) - np.pi * t * t / 3.24 + 6j * t))
    K = HGroupFunction.sample(GRID, lambda x, y, t: np.exp(-np.pi * (x * x + y * y) - np.pi * t * t / 3.24 - 10j * t))
    sigma = symbol_from_kernel(KernelField.constant(K), dual)
    result = estimate_group_sc_limit(concentration_family(F, HeisenbergElement(), LADDER[:3]), sigma)
    assert abs(result.estimate.limit) <= 1e-10 * F.norm() ** 2


@pytest.fixture(scope="module")
def concentration_limit(dual, profile):
    kernel = gaussian(GRID, s=np.sqrt(0.5), w=np.sqrt(0.5))
    sigma = symbol_from_kernel(KernelField.separable([(bump, kernel)]), dual)
    return estimate_group_sc_limit(concentration_family(profile, ANCHOR, LADDER), sigma)


def test_concentration_limit_matches_oracle(concentration_limit):
    res = concentration_limit
    assert res.estimate.verdict == "converged"
    assert abs(res.estimate.limit - res.oracle) <= 1e-3 * abs(res.oracle)


def test_measure_summary_reproduces_the_limit(concentration_limit):
    res = concentration_limit
    assert is_positive(res.measure)
    assert abs(res.measure_pairing - res.oracle) <= 1e-6 * abs(res.oracle)


def test_gram_symbol_has_nonnegative_limit(dual, profile):
    tau = gaussian(GRID, 0.2, -0.1, 0.0, 0.8, 0.9)
    field = gram_field([(bump, tau)])
    result = estimate_group_sc_limit(concentration_family(profile, ANCHOR, LADDER[:3]), symbol_from_kernel(field, dual))
    assert result.estimate.limit.real >= -1e-6
    assert abs(result.estimate.limit.imag) <= 1e-8 * abs(result.estimate.limit)
    # the limit is |bump(anchor)|^2 ||F * tau||^2
    expected = bump(ANCHOR.x, ANCHOR.y, ANCHOR.t) ** 2 * convolve(profile, tau).norm() ** 2
    assert result.oracle == pytest.approx(expected, rel=1e-10)


def test_unbounded_family_is_rejected(dual, profile):
    family = GroupFamily((0.5, 0.25), lambda eps: profile * (1 / eps**4))
    with pytest.raises(DegenerateInputError):
        estimate_group_sc_limit(family, identity_symbol(GRID, dual))


def test_family_grid_must_match(dual):
    family = concentration_family(gaussian(Grid(3, 6.0, 32)), ANCHOR, LADDER[:2])
    with pytest.raises(GridMismatchError):
        estimate_group_sc_limit(family, identity_symbol(GRID, dual))


def test_kernel_path_in_dilated_frame_matches_direct_quantization():
    # at eps = 1 the dilated frame is the original one
    field = KernelField.separable([(bump, gaussian(NORM_GRID, s=0.6, w=0.6))])
    f = gaussian(NORM_GRID, 0.3, 0.1, 0.0, 0.8, 0.8)
    direct = HGroupFunction(NORM_GRID, HGroupFunction.sample(NORM_GRID, bump).values
                            * convolve(f, field.components[0].kernel).values)
    assert rel(apply_via_kernels(field, f, 1.0), direct) <= 1e-14
