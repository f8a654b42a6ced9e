"""The scenarios the harness can run.

Each scenario takes its validated parameter dict and a seeded generator and
returns a :class:`ScenarioResult`: per-rung rows, scalar results, verdicts
(each naming the config key of its tolerance) and matrices to serialize.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

VERDICT_COMPARISONS = ("<=", ">=")


@dataclass
class ScenarioResult:
    rungs: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    matrices: dict = field(default_factory=dict)
    attachments: dict = field(default_factory=dict)
    exploratory: bool = False

    def rung(self, param, value, oracle=None, label=None):
        row = {"rung": float(param), "value": complex(value), "oracle": None if oracle is None else float(oracle)}
        if label is not None:
            row["label"] = label
        self.rungs.append(row)

    def verdict(self, name, value, tolerance, key, comparison="<="):
        """``value <comparison> tolerance``; ``key`` names the config parameter (or ``structural``)."""
        if comparison not in VERDICT_COMPARISONS:
            raise ValueError(f"comparison must be one of {VERDICT_COMPARISONS}")
        value, tolerance = float(value), float(tolerance)
        self.verdicts[name] = {"value": value, "tolerance": tolerance, "tolerance_key": key,
                               "comparison": comparison, "passed": compare(value, tolerance, comparison)}

    def flag(self, name, ok: bool):
        """Structural yes/no check recorded as ``value >= 1``."""
        self.verdict(name, 1.0 if ok else 0.0, 1.0, "structural", ">=")


def compare(value: float, tolerance: float, comparison: str) -> bool:
    if value != value:
        return False
    return value <= tolerance if comparison == "<=" else value >= tolerance


def _ladder(params, base=2.0):
    return [base**-exponent for exponent in range(params["ladder_first"], params["ladder_last"] + 1)]


def _rel(value, reference):
    return abs(value - reference) / abs(reference)


# -- Euclidean ------------------------------------------------------------------------


def euclid_concentration(params, rng) -> ScenarioResult:
    from ..euclid.limits import concentration_family, estimate_sc_limit, gaussian_profile, sc_oracle_concentration
    from ..euclid.quantize import PhaseSymbol

    chi = gaussian_profile()
    symbol = PhaseSymbol(lambda x, xi: np.exp(-x * x - xi * xi), xi_radius=5.0)
    oracle = sc_oracle_concentration(chi, params["x0"], symbol)
    return _euclid_limit(estimate_sc_limit(concentration_family(chi, params["x0"], _ladder(params)), symbol), oracle, params)


def euclid_oscillation(params, rng) -> ScenarioResult:
    from ..euclid.limits import estimate_sc_limit, gaussian_profile, oscillation_family, sc_oracle_oscillation
    from ..euclid.quantize import PhaseSymbol

    psi, xi0 = gaussian_profile(), params["xi0"]
    symbol = PhaseSymbol(lambda x, xi: np.exp(-x * x - (xi - xi0) ** 2), xi_radius=5.0 + abs(xi0))
    oracle = sc_oracle_oscillation(psi, xi0, symbol)
    return _euclid_limit(estimate_sc_limit(oscillation_family(psi, xi0, _ladder(params)), symbol), oracle, params)


def _euclid_limit(est, oracle, params) -> ScenarioResult:
    res = ScenarioResult()
    for eps, value in zip(est.params, est.values):
        res.rung(eps, value, oracle)
    res.results.update(limit=est.best, oracle=oracle, rate=est.rate, verdict=est.verdict)
    res.flag("converged", est.converged)
    res.verdict("limit_relative_error", _rel(est.best, oracle), params["tolerance"], "tolerance")
    err = np.abs(est.values - oracle)
    res.flag("error_monotone_last_three", bool(err[-1] < err[-2] < err[-3]))
    return res


def euclid_mdm(params, rng) -> ScenarioResult:
    from ..euclid.limits import d_chi, estimate_mdm, gaussian_profile, mdm_concentration_family

    chi = gaussian_profile()
    exact = 1 / (2 * sqrt(2))
    d_plus, d_minus = d_chi(chi, 1.0), d_chi(chi, -1.0)
    norm_sq = chi.norm_sq()
    spatial = lambda x: np.exp(-x * x)
    angular = lambda w: 1 + 0.5 * w
    ladder = [2**exponent for exponent in range(params["ladder_first"], params["ladder_last"] + 1)]
    est = estimate_mdm(mdm_concentration_family(chi, params["x0"], ladder), lambda x, w: spatial(x) * angular(w))
    target = float(spatial(params["x0"]) * (angular(1.0) + angular(-1.0)) * exact)
    res = ScenarioResult()
    for order, value in zip(est.params, est.values):
        res.rung(order, value, target)
    res.results.update(d_chi_plus=d_plus, d_chi_minus=d_minus, d_chi_exact=exact, estimate=est.best, target=target,
                       cutoff_spread=est.details["cutoff_spread"])
    tol = params["radial_tolerance"]
    res.verdict("d_chi_plus_error", abs(d_plus - exact), tol, "radial_tolerance")
    res.verdict("d_chi_minus_error", abs(d_minus - exact), tol, "radial_tolerance")
    res.verdict("polar_mass_error", abs(d_plus + d_minus - norm_sq), tol, "radial_tolerance")
    res.verdict("estimate_relative_error", _rel(est.best, target), params["tolerance"], "tolerance")
    return res


# -- Schrodinger ------------------------------------------------------------------------


def _vanishing_probe(x):
    from scipy.special import expit

    return expit(8 * (x + 2)) * expit(-8 * (x - 2))


def schrodinger_regime(params, rng) -> ScenarioResult:
    from .. import schrodinger as sch
    from ..euclid.limits import concentration_family, gaussian_profile, oscillation_family

    chi = gaussian_profile()
    chosen = [item.strip() for item in params["regimes"].split(",") if item.strip()]
    res = ScenarioResult()
    long_ladder = [2.0**-exponent for exponent in range(3, 8)]
    short_ladder = [2.0**-exponent for exponent in range(3, 7)]

    def record(tag, report, t):
        for row in report.rows:
            if row["t"] == t:
                res.rung(row["eps"], row["pairing"], row["prediction"], label=f"{tag}@{row['eps']:g}")

    if "invariance" in chosen:
        rep = sch.regime_report(sch.RegimeScenario(0.5, [0.0, 1.0], concentration_family(chi, 0.3, long_ladder),
                                                   [lambda x: np.exp(-x * x / 4)]))
        row = rep.verdicts[(1.0, "a0")]
        record("invariance", rep, 1.0)
        res.flag("invariance_residual_decreasing", row["decreasing"])
        res.verdict("invariance_final_relative", row["final_relative"], params["invariance_tolerance"], "invariance_tolerance")
    if "transport" in chosen:
        for kind, fam in (("oscillation", oscillation_family(chi, 1.0, short_ladder)),
                          ("concentration", concentration_family(chi, 0.3, short_ladder))):
            rep = sch.regime_report(sch.RegimeScenario(1.0, [0.25], fam, [lambda x: np.exp(-x * x)]))
            row = rep.verdicts[(0.25, "a0")]
            record(f"transport-{kind}", rep, 0.25)
            res.flag(f"transport_{kind}_decreasing", row["decreasing"])
            res.verdict(f"transport_{kind}_final", row["final"], params["transport_tolerance"], "transport_tolerance")
    if "vanishing" in chosen:
        rep = sch.regime_report(sch.RegimeScenario(2.0, [1.0], concentration_family(chi, 0.3, short_ladder),
                                                   [_vanishing_probe], threshold=params["vanishing_factor"]))
        row = rep.verdicts[(1.0, "a0")]
        record("vanishing", rep, 1.0)
        res.verdict("vanishing_decay_factor", row["decay_factor"], params["vanishing_factor"], "vanishing_factor", ">=")
    return res


# -- Heisenberg group ----------------------------------------------------------------------


def _random_element(rng, spread):
    from ..heisenberg.group import HeisenbergElement

    return HeisenbergElement(*rng.uniform(-spread, spread, 3))


def heisenberg_algebra(params, rng) -> ScenarioResult:
    from ..grid import Grid
    from ..heisenberg.group import (HeisenbergElement, HGroupFunction, IDENTITY, inverse, left_invariant_derivative,
                                    multiply)
    from ..heisenberg.rep import basis_for, homomorphism_residual, schrodinger_rep, unitarity_residual

    res = ScenarioResult()
    example = multiply(HeisenbergElement(1, 0, 0), HeisenbergElement(0, 1, 0))
    res.results["example_product"] = list(example.as_tuple())
    res.flag("example_product_is_(1,1,0.5)", example.as_tuple() == (1.0, 1.0, 0.5))

    spread = params["element_range"]

    def gap(left, right):
        return max(abs(u - w) for u, w in zip(left.as_tuple(), right.as_tuple()))

    axiom = 0.0
    for _ in range(params["pairs"]):
        first, second, third = (_random_element(rng, spread) for _ in range(3))
        associativity = gap(multiply(multiply(first, second), third), multiply(first, multiply(second, third)))
        axiom = max(axiom, associativity, gap(multiply(first, inverse(first)), IDENTITY),
                    gap(multiply(IDENTITY, first), first))
    res.verdict("group_axioms", axiom, params["axiom_tolerance"], "axiom_tolerance")

    mags = np.geomspace(params["lam_min"], params["lam_max"], params["lam_count"])
    lams = np.concatenate([-mags[::-1], mags])
    truncation = params["truncation"]
    worst_hom = worst_unit = 0.0
    doubling_ok = True
    for lam in lams:
        lam = float(lam)
        basis, fine = basis_for(lam, truncation), basis_for(lam, 2 * truncation)
        hom = unit = hom_fine = 0.0
        for _ in range(params["pairs"]):
            first, second = _random_element(rng, spread), _random_element(rng, spread)
            hom = max(hom, homomorphism_residual(lam, first, second, basis))
            hom_fine = max(hom_fine, homomorphism_residual(lam, first, second, fine))
            unit = max(unit, unitarity_residual(schrodinger_rep(lam, first, basis)))
        res.rung(lam, hom, 0.0, label=f"lambda={lam:g}")
        worst_hom, worst_unit = max(worst_hom, hom), max(worst_unit, unit)
        doubling_ok &= hom_fine <= max(hom, 1e-13)
    res.verdict("homomorphism_residual", worst_hom, params["tolerance"], "tolerance")
    res.verdict("unitarity_residual", worst_unit, params["tolerance"], "tolerance")
    res.flag("residual_decreases_when_M_doubles", doubling_ok)

    grid = Grid(3, 6.0, 64)
    smooth = HGroupFunction.sample(grid, lambda x, y, t: (1 + x * y) * np.exp(-np.pi * (x**2 + y**2 + t**2) / 2))
    deriv = left_invariant_derivative
    comm = deriv("X1", deriv("X2", smooth)) - deriv("X2", deriv("X1", smooth))
    central = deriv("T", smooth)
    res.verdict("commutator_residual", np.abs((comm - central).values).max() / np.abs(central.values).max(),
                params["commutator_tolerance"], "commutator_tolerance")
    res.matrices["pi_1(1,0,0)"] = schrodinger_rep(1.0, HeisenbergElement(1, 0, 0), basis_for(1.0, 16)).matrix[:4, :4]
    return res


def heisenberg_plancherel(params, rng) -> ScenarioResult:
    from ..grid import Grid
    from ..heisenberg.calibration import standard_fit

    grid = Grid(3, params["half_width"], params["grid_points"])
    fit = standard_fit(grid)
    fine = standard_fit(grid, refine=2)
    constant, constant_fine = fit.measure.c, fine.measure.c
    analytic = 1 / (4 * np.pi**2)
    res = ScenarioResult()
    for index, residual in enumerate(np.concatenate([fit.residuals, fit.heldout_residuals])):
        kind = "calibration" if index < fit.residuals.size else "heldout"
        res.rung(index, 1 + residual, 1.0, label=f"{kind}-{index}")
    res.results.update(c=constant, c_refined=constant_fine, c_analytic=analytic, nodes=int(fit.measure.nodes.size),
                       nodes_refined=int(fine.measure.nodes.size))
    res.verdict("calibration_residual", np.abs(fit.residuals).max(), params["tolerance"], "tolerance")
    res.verdict("heldout_residual", np.abs(fit.heldout_residuals).max(), params["tolerance"], "tolerance")
    res.verdict("node_doubling_change", _rel(constant_fine, constant), params["stability"], "stability")
    return res


# -- group quantization -----------------------------------------------------------------------


def _gaussian(grid, cx=0.0, cy=0.0, ct=0.0, width=1.0, t_width=1.0):
    from ..heisenberg.group import HGroupFunction

    return HGroupFunction.sample(grid, lambda x, y, t: np.exp(-np.pi * ((x - cx) ** 2 + (y - cy) ** 2) / width**2
                                                              - np.pi * (t - ct) ** 2 / t_width**2))


def group_op_identity(params, rng) -> ScenarioResult:
    from ..group_quantize import KernelField, identity_symbol, kernel_from_symbol, op_apply, symbol_from_kernel
    from ..heisenberg.calibration import HELDOUT_PARAMS, STANDARD_GRID, calibrated_measure, separable_function
    from ..heisenberg.group import HGroupFunction, convolve

    grid = STANDARD_GRID
    dual = calibrated_measure(grid, lam_max=params["lam_max"])
    probe = separable_function(grid, HELDOUT_PARAMS[0])
    res = ScenarioResult()

    ident = op_apply(identity_symbol(grid, dual), probe)
    err = (ident.value - probe).norm() / probe.norm()
    report = ident.truncation
    res.results.update(identity_error=err, truncation={key: val for key, val in report.items() if key != "modes"})
    res.verdict("identity_relative_error", err, params["identity_tolerance"], "identity_tolerance")
    # consistent report: the measured error is within a factor two of the estimate
    res.flag("truncation_report_consistent", err <= 2 * report["estimate"])

    kernel = HGroupFunction.sample(grid, lambda x, y, t: np.exp(-np.pi * (x * x + y * y / 1.44) - np.pi * t * t / 6.25)
                                   * t)
    sigma = symbol_from_kernel(KernelField.constant(kernel), dual, tail_tol=1e-6)
    back = kernel_from_symbol(sigma).components[0].kernel
    rt = (back - kernel).norm() / kernel.norm()
    res.verdict("round_trip_relative_error", rt, params["round_trip_tolerance"], "round_trip_tolerance")

    conv_kernel = _gaussian(grid, width=0.7, t_width=0.7)
    out = op_apply(symbol_from_kernel(KernelField.constant(conv_kernel), dual), probe).value
    direct = convolve(probe, conv_kernel)
    cerr = (out - direct).norm() / direct.norm()
    res.verdict("convolution_relative_error", cerr, params["convolution_tolerance"], "convolution_tolerance")
    res.results.update(round_trip_error=rt, convolution_error=cerr)
    for tag, value in (("identity", err), ("round_trip", rt), ("convolution", cerr)):
        res.rung(len(res.rungs), value, 0.0, label=tag)
    return res


def _gaussian_amplitude(centre, spread):
    cx, cy, ct = centre
    return lambda x, y, t: np.exp(-((x - cx) ** 2 + (y - cy) ** 2 + (t - ct) ** 2) / spread)


def _random_norm_triple(rng, grid):
    from ..group_quantize import KernelField

    pairs = []
    for _ in range(int(rng.integers(1, 3))):
        centre = rng.uniform(-1, 1, 3)
        spread = rng.uniform(2, 10)
        amp = _gaussian_amplitude(centre, spread)
        kc = rng.uniform(-0.3, 0.3, 3)
        kernel = _gaussian(grid, kc[0], kc[1], kc[2], rng.uniform(0.5, 0.8), rng.uniform(0.5, 0.8))
        pairs.append((amp, kernel * complex(*rng.normal(size=2))))
    eps = float(rng.choice([1.0, 0.5, 0.25]))
    pc = rng.uniform(-0.5, 0.5, 3)
    probe = _gaussian(grid, pc[0], pc[1], pc[2], rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0))
    return KernelField.separable(pairs), eps, probe


def group_norm_bound(params, rng) -> ScenarioResult:
    from ..grid import Grid
    from ..group_quantize import op_norm_bound_check

    grid = Grid(3, 4.0, params["grid_points"])
    res = ScenarioResult()
    worst = 0.0
    for index in range(params["triples"]):
        kfield, eps, probe = _random_norm_triple(rng, grid)
        rep = op_norm_bound_check(kfield, eps, [probe], power_steps=params["power_steps"], slack=params["slack"])
        ratio = rep.worst / rep.seminorm
        worst = max(worst, ratio)
        res.rung(index, rep.worst, rep.seminorm, label=f"triple-{index}@eps={eps:g}")
    res.results["worst_ratio_to_seminorm"] = worst
    res.verdict("norm_over_seminorm", worst, 1 + params["slack"], "slack")
    return res


def group_kernel_concentration(params, rng) -> ScenarioResult:
    from ..grid import Grid
    from ..group_quantize import KernelField, homogeneous_cutoff, kernel_concentration_check

    grid = Grid(3, 4.0, 64)
    report = kernel_concentration_check(KernelField.constant(_gaussian(grid)), _ladder(params),
                                        homogeneous_cutoff(params["radius"]))
    res = ScenarioResult()
    for eps, residual in zip(report.eps, report.residuals):
        res.rung(eps, residual, 0.0)
    res.results.update(exponents=report.exponents.tolist(), residuals=report.residuals.tolist())
    res.verdict("final_exponent", report.final_exponent, params["min_exponent"], "min_exponent", ">=")
    res.flag("exponents_increasing", bool(np.all(np.diff(report.exponents) > 0)))
    return res


def group_sc_limit(params, rng) -> ScenarioResult:
    from ..group_quantize import KernelField, concentration_family, estimate_group_sc_limit, gram_field, symbol_from_kernel
    from ..heisenberg.calibration import CALIBRATION_PARAMS, STANDARD_GRID, calibrated_measure, separable_function
    from ..heisenberg.group import HeisenbergElement
    from ..ovmeasure import is_positive, to_dict

    grid = STANDARD_GRID
    dual = calibrated_measure(grid)
    profile = separable_function(grid, CALIBRATION_PARAMS[1])
    anchor = HeisenbergElement(0.3, -0.2, 0.1)
    bump = lambda x, y, t: np.exp(-(x * x + y * y) / 4 - t * t / 4)
    ladder = _ladder(params)
    sigma = symbol_from_kernel(KernelField.separable([(bump, _gaussian(grid, width=sqrt(0.5), t_width=sqrt(0.5)))]), dual)
    out = estimate_group_sc_limit(concentration_family(profile, anchor, ladder), sigma)
    res = ScenarioResult(exploratory=True)
    for eps, value in zip(out.estimate.params, out.estimate.values):
        res.rung(eps, value, out.oracle.real)
    res.results.update(limit=out.estimate.best, oracle=out.oracle, measure_pairing=out.measure_pairing,
                       verdict=out.estimate.verdict)
    res.flag("converged", out.estimate.converged)
    res.verdict("limit_vs_oracle", _rel(out.estimate.best, out.oracle), params["tolerance"], "tolerance")
    res.verdict("measure_pairing_vs_oracle", _rel(out.measure_pairing, out.oracle), params["measure_tolerance"],
                "measure_tolerance")
    res.flag("measure_positive", is_positive(out.measure))
    res.attachments["measure"] = to_dict(out.measure)

    gram = gram_field([(bump, _gaussian(grid, 0.2, -0.1, 0.0, 0.8, 0.9))])
    pos = estimate_group_sc_limit(concentration_family(profile, anchor, ladder[:3]), symbol_from_kernel(gram, dual))
    res.results["gram_limit"] = pos.estimate.best
    res.verdict("gram_limit_real_part", pos.estimate.best.real, params["positivity_floor"], "positivity_floor", ">=")
    return res


RUNNERS = {
    "euclid-concentration": euclid_concentration,
    "euclid-oscillation": euclid_oscillation,
    "euclid-mdm": euclid_mdm,
    "schrodinger-regime": schrodinger_regime,
    "heisenberg-algebra": heisenberg_algebra,
    "heisenberg-plancherel": heisenberg_plancherel,
    "group-op-identity": group_op_identity,
    "group-norm-bound": group_norm_bound,
    "group-kernel-concentration": group_kernel_concentration,
    "group-sc-limit": group_sc_limit,
}
