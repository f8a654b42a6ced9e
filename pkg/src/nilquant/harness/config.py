"""Scenario configuration: flat ``key = value`` files with one section per module.

A file names its scenario in ``[scenario]`` and may override that
scenario's parameters in the module section, e.g.::

    [scenario]
    name = euclid-concentration
    seed = 7

    [euclid]
    x0 = 0.25
    tolerance = 0.02

    [output]
    dir = reports
    format = both

Unknown sections, unknown keys and out-of-range values are rejected with
:class:`ConfigError`.  The parameter table below is the reference for every
scenario (see ``docs/configuration.md``).
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError

FORMATS = ("json", "csv", "both")
SEED_MAX = 2**64 - 1


@dataclass(frozen=True)
class Param:
    kind: type
    default: object
    low: float | None = None
    high: float | None = None
    help: str = ""

    def parse(self, key: str, text: str):
        try:
            if self.kind is bool:
                value = {"true": True, "false": False, "1": True, "0": False}[text.strip().lower()]
            else:
                value = self.kind(text.strip())
        except (KeyError, ValueError):
            raise ConfigError(f"{key}: cannot read {text!r} as {self.kind.__name__}") from None
        self.validate(key, value)
        return value

    def validate(self, key: str, value) -> None:
        if self.kind in (int, float):
            if value != value:
                raise ConfigError(f"{key}: NaN is not allowed")
            if self.low is not None and value < self.low:
                raise ConfigError(f"{key} = {value} is below the minimum {self.low}")
            if self.high is not None and value > self.high:
                raise ConfigError(f"{key} = {value} is above the maximum {self.high}")


def _param(kind, default, low=None, high=None, help=""):
    return Param(kind, default, low, high, help)


_EUCLID_LADDER = {
    "ladder_first": _param(int, 3, 1, 12, "first exponent k of eps = 2^-k"),
    "ladder_last": _param(int, 7, 3, 12, "last exponent k of eps = 2^-k"),
}

#: scenario -> (config section, parameter table)
SCENARIOS: dict[str, tuple[str, dict[str, Param]]] = {
    "euclid-concentration": ("euclid", {
        **_EUCLID_LADDER,
        "x0": _param(float, 0.3, -1.5, 1.5, "concentration point"),
        "tolerance": _param(float, 0.02, 0.0, 1.0, "relative error of the extrapolated limit"),
    }),
    "euclid-oscillation": ("euclid", {
        **_EUCLID_LADDER,
        "xi0": _param(float, 1.0, -3.0, 3.0, "oscillation frequency"),
        "tolerance": _param(float, 0.02, 0.0, 1.0, "relative error of the extrapolated limit"),
    }),
    "euclid-mdm": ("euclid", {
        "ladder_first": _param(int, 3, 1, 10, "first exponent k of j = 2^k"),
        "ladder_last": _param(int, 7, 3, 10, "last exponent k of j = 2^k"),
        "x0": _param(float, 0.3, -1.5, 1.5, "concentration point"),
        "tolerance": _param(float, 0.03, 0.0, 1.0, "relative error of the defect estimate"),
        "radial_tolerance": _param(float, 1e-6, 0.0, 1.0, "absolute error of d_chi(+-1) and the polar mass"),
    }),
    "schrodinger-regime": ("schrodinger", {
        "regimes": _param(str, "invariance,transport,vanishing", help="comma list of regimes to run"),
        "invariance_tolerance": _param(float, 0.02, 0.0, 1.0, "final residual relative to the t=0 pairing"),
        "transport_tolerance": _param(float, 0.05, 0.0, 1.0, "final relative error against the transport oracle"),
        "vanishing_factor": _param(float, 5.0, 1.0, 1e6, "required mass decay factor for tau = 2"),
    }),
    "heisenberg-algebra": ("heisenberg", {
        "pairs": _param(int, 100, 1, 10000, "random pairs (g, h) per lambda"),
        "truncation": _param(int, 32, 8, 512, "Hermite truncation M"),
        "lam_min": _param(float, 0.25, 0.125, 8.0, "smallest |lambda|"),
        "lam_max": _param(float, 4.0, 0.125, 8.0, "largest |lambda|"),
        "lam_count": _param(int, 5, 1, 64, "number of |lambda| values (log-spaced, both signs)"),
        "element_range": _param(float, 1.0, 0.0, 10.0, "coordinates of random elements lie in [-r, r]"),
        "tolerance": _param(float, 1e-6, 0.0, 1.0, "homomorphism and unitarity residuals"),
        "axiom_tolerance": _param(float, 1e-12, 0.0, 1.0, "group axioms on random elements"),
        "commutator_tolerance": _param(float, 1e-8, 0.0, 1.0, "relative [X1, X2] - T residual"),
    }),
    "heisenberg-plancherel": ("heisenberg", {
        "grid_points": _param(int, 64, 32, 128, "samples per axis"),
        "half_width": _param(float, 6.0, 2.0, 12.0, "grid half width L"),
        "tolerance": _param(float, 0.01, 0.0, 1.0, "Plancherel residual per function"),
        "stability": _param(float, 0.02, 0.0, 1.0, "relative change of c under node doubling"),
    }),
    "group-op-identity": ("group", {
        "lam_max": _param(float, 8.0, 0.5, 8.0, "upper end of the dual window"),
        "identity_tolerance": _param(float, 0.01, 0.0, 1.0, "relative L2 error of Op(I) f"),
        "round_trip_tolerance": _param(float, 1e-6, 0.0, 1.0, "kernel/symbol round trip"),
        "convolution_tolerance": _param(float, 1e-3, 0.0, 1.0, "Fourier path against direct convolution"),
    }),
    "group-norm-bound": ("group", {
        "triples": _param(int, 20, 1, 200, "random (sigma, eps, probe) triples"),
        "grid_points": _param(int, 48, 16, 64, "samples per axis (coarser grids alias the twisted phase)"),
        "power_steps": _param(int, 3, 0, 50, "power-iteration steps per triple"),
        "slack": _param(float, 0.05, 0.0, 1.0, "allowed excess over the A0 seminorm"),
    }),
    "group-kernel-concentration": ("group", {
        "ladder_first": _param(int, 1, 0, 8, "first exponent k of eps = 2^-k"),
        "ladder_last": _param(int, 4, 2, 10, "last exponent k of eps = 2^-k"),
        "radius": _param(float, 0.15, 1e-3, 2.0, "radius of the homogeneous cutoff"),
        "min_exponent": _param(float, 2.0, 0.0, 100.0, "required decay exponent at the final rung"),
    }),
    "group-sc-limit": ("group", {
        "ladder_first": _param(int, 1, 0, 8, "first exponent k of eps = 2^-k"),
        "ladder_last": _param(int, 5, 2, 10, "last exponent k of eps = 2^-k"),
        "tolerance": _param(float, 1e-3, 0.0, 1.0, "extrapolated limit against the kernel-path oracle"),
        "measure_tolerance": _param(float, 1e-6, 0.0, 1.0, "measure pairing against the oracle"),
        "positivity_floor": _param(float, -1e-6, -1.0, 0.0, "lower bound for limits of tau* tau symbols"),
    }),
}

_SCENARIO_KEYS = {"name", "seed"}
_OUTPUT_KEYS = {"dir", "format"}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "."
    fmt: str = "both"

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.name!r}; run 'nilquant list'")
        table = SCENARIOS[self.name][1]
        merged = {key: param.default for key, param in table.items()}
        for key, value in self.params.items():
            if key not in table:
                raise ConfigError(f"unknown parameter {key!r} for scenario {self.name}")
            table[key].validate(key, value)
            merged[key] = value
        object.__setattr__(self, "params", merged)
        _check_seed(self.seed)
        if self.fmt not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        _cross_checks(self.name, merged)

    @property
    def section(self) -> str:
        return SCENARIOS[self.name][0]

    def echo(self) -> dict:
        return {"name": self.name, "seed": self.seed, self.section: dict(sorted(self.params.items()))}


def _check_seed(seed) -> None:
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= SEED_MAX:
        raise ConfigError(f"seed must be an integer in [0, 2^64 - 1], got {seed!r}")


def _cross_checks(name: str, params: dict) -> None:
    if "ladder_first" in params and params["ladder_last"] - params["ladder_first"] < 2:
        raise ConfigError("a ladder needs at least three rungs (ladder_last - ladder_first >= 2)")
    if name == "heisenberg-algebra" and params["lam_min"] > params["lam_max"]:
        raise ConfigError("lam_min must not exceed lam_max")
    if name == "schrodinger-regime":
        chosen = [item.strip() for item in params["regimes"].split(",") if item.strip()]
        if not chosen or any(item not in ("invariance", "transport", "vanishing") for item in chosen):
            raise ConfigError("regimes must be a comma list drawn from invariance, transport, vanishing")


def parse_seed(text: str) -> int:
    try:
        seed = int(text)
    except ValueError:
        raise ConfigError(f"seed must be an integer, got {text!r}") from None
    _check_seed(seed)
    return seed


def parse_config(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    if not parser.has_section("scenario") or not parser.has_option("scenario", "name"):
        raise ConfigError("the configuration must name a scenario in [scenario] name = ...")
    extra = set(parser["scenario"]) - _SCENARIO_KEYS
    if extra:
        raise ConfigError(f"unknown keys in [scenario]: {sorted(extra)}")
    name = parser["scenario"]["name"].strip()
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; run 'nilquant list'")
    section, table = SCENARIOS[name]
    for sec in parser.sections():
        if sec not in ("scenario", "output", section):
            raise ConfigError(f"section [{sec}] does not apply to scenario {name} (expected [{section}])")
    params = {}
    if parser.has_section(section):
        for key, raw in parser[section].items():
            if key not in table:
                raise ConfigError(f"unknown parameter {key!r} in [{section}] for scenario {name}")
            params[key] = table[key].parse(key, raw)
    seed = parse_seed(parser["scenario"].get("seed", "0"))
    out_dir, fmt = ".", "both"
    if parser.has_section("output"):
        extra = set(parser["output"]) - _OUTPUT_KEYS
        if extra:
            raise ConfigError(f"unknown keys in [output]: {sorted(extra)}")
        out_dir = parser["output"].get("dir", out_dir).strip()
        fmt = parser["output"].get("format", fmt).strip()
    return ScenarioConfig(name, params, seed, out_dir, fmt)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    return parse_config(text)


def default_config(name: str, **params) -> ScenarioConfig:
    return ScenarioConfig(name, params)
