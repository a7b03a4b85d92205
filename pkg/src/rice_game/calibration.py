"""Scenario construction: exogenous paths, damage fits, weights, file I/O.

A scenario file is a JSON document with top-level sections ``geo``,
``regions``, ``exogenous``, ``initial_state``, ``weights`` and ``bounds``
(plus ``schema_version`` and ``horizon``). Field names carry units.
Exogenous drivers are stored as generator parameters, not materialized
paths; generation is deterministic, so serialize/parse round-trips
reproduce a scenario exactly.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .model import (
    ControlProfile,
    ExogenousPaths,
    GeoParams,
    ModelDomainError,
    RegionParams,
    RiceGameError,
    RiceState,
    Scenario,
    simulate,
)

__all__ = [
    "SCHEMA_VERSION",
    "CANONICAL_REGIONS",
    "CANONICAL_DEVELOPED",
    "ScenarioFormatError",
    "RegionGrowthSpec",
    "ExogenousGrowthSpec",
    "generate_exogenous",
    "calibrate_damage",
    "negishi_weights",
    "validate_scenario",
    "parse_scenario",
    "serialize_scenario",
    "load_scenario",
    "save_scenario",
    "build_default_scenario",
]

SCHEMA_VERSION = 1

#: Canonical 12-region split; the first cluster below is "developed".
CANONICAL_REGIONS = (
    "US",
    "EU",
    "Japan",
    "Russia",
    "Eurasia",
    "China",
    "India",
    "MidEast",
    "Africa",
    "LatAm",
    "OHI",
    "OthAsia",
)
CANONICAL_DEVELOPED = ("US", "EU", "Japan", "OHI")


class ScenarioFormatError(RiceGameError):
    """A scenario file is structurally invalid (bad keys, types, or version)."""


@dataclass(frozen=True)
class RegionGrowthSpec:
    """Generator parameters for one region's exogenous drivers.

    TFP grows by a factor (1 + g(t)) per step with g(t) itself declining
    geometrically; population converges monotonically to its asymptote;
    emission intensity and land-use emissions decay geometrically. Rates
    are per 5-year step.
    """

    tfp0: float
    tfp_growth0: float
    tfp_growth_decline: float
    pop0: float
    pop_asymptote: float
    pop_convergence: float
    sigma0: float
    sigma_decline: float
    e_land0: float
    e_land_decline: float


@dataclass(frozen=True)
class ExogenousGrowthSpec:
    """Generator parameters for all exogenous paths of a scenario."""

    regions: tuple[RegionGrowthSpec, ...]
    f_ex_start: float
    f_ex_end: float
    f_ex_ramp_steps: int
    length: int


def generate_exogenous(spec: ExogenousGrowthSpec) -> ExogenousPaths:
    """Materialize exogenous paths of shape (length, n) from a growth spec."""
    n = len(spec.regions)
    length = spec.length
    if length < 2:
        raise ModelDomainError("exogenous length must be at least 2")
    tfp = np.empty((length, n))
    labor = np.empty((length, n))
    sigma = np.empty((length, n))
    e_land = np.empty((length, n))
    for i, r in enumerate(spec.regions):
        a = r.tfp0
        g = r.tfp_growth0
        pop = r.pop0
        for t in range(length):
            tfp[t, i] = a
            labor[t, i] = pop
            a = a * (1.0 + g)
            g = g * (1.0 - r.tfp_growth_decline)
            pop = pop * (r.pop_asymptote / pop) ** r.pop_convergence
        tgrid = np.arange(length)
        sigma[:, i] = r.sigma0 * (1.0 - r.sigma_decline) ** tgrid
        e_land[:, i] = r.e_land0 * (1.0 - r.e_land_decline) ** tgrid
    ramp = max(spec.f_ex_ramp_steps, 1)
    frac = np.minimum(np.arange(length) / ramp, 1.0)
    f_ex = spec.f_ex_start + (spec.f_ex_end - spec.f_ex_start) * frac
    return ExogenousPaths(tfp=tfp, labor=labor, sigma=sigma, e_land=e_land, f_ex=f_ex)


def calibrate_damage(loss_at_2c: float) -> tuple[float, float, float]:
    """Damage coefficients (a1, a2, a3) from the fractional loss at 2 degC.

    Uses the quadratic form a1 = 0, a3 = 2, a2 = loss / 4, so that
    1 - a1*2 - a2*2^a3 = 1 - loss.
    """
    if not 0.0 <= loss_at_2c < 1.0:
        raise ModelDomainError("loss at 2 degC must lie in [0, 1)")
    return 0.0, loss_at_2c / 4.0, 2.0


def negishi_weights(scenario: Scenario, s_ref: float = 0.25) -> np.ndarray:
    """Welfare weights that equalize weighted marginal utilities.

    Simulates the no-abatement baseline (mu = 0, s = ``s_ref``, clipped
    into the scenario bounds) over the scenario horizon, time-averages
    each region's marginal utility of per-capita consumption and returns
    the normalized inverses.
    """
    s_lo, s_hi = scenario.s_bounds
    mu_lo, _ = scenario.mu_bounds
    profile = ControlProfile.constant(
        scenario.n_regions,
        scenario.horizon,
        min(max(s_ref, s_lo), s_hi),
        mu_lo,
    )
    traj = simulate(scenario.x0, profile, scenario)
    labor = scenario.exo.labor[: scenario.horizon + 1]
    cpc = traj.consumption / labor
    marginal = np.mean(cpc ** (-scenario._alpha), axis=0)
    w = 1.0 / marginal
    return w / w.sum()


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_scenario(scenario: Scenario) -> list[str]:
    """Check every scenario invariant; return a list of violation messages.

    An empty list means the scenario is valid.
    """
    v: list[str] = []
    geo = scenario.geo
    n = scenario.n_regions

    for name, val in dataclasses.asdict(geo).items():
        if not np.isfinite(val):
            v.append(f"geo.{name} is not finite")
    zmat = geo.carbon_matrix()
    if np.any(zmat < 0.0):
        v.append("carbon matrix has negative entries")
    cols = zmat.sum(axis=0)
    for j, s in enumerate(cols):
        if abs(s - 1.0) > 1e-6:
            v.append(f"carbon matrix column {j} sums to {s!r}, not 1 within 1e-6")
    for nm, val in (("phi11", geo.phi11), ("phi22", geo.phi22)):
        if not 0.0 < val < 1.0:
            v.append(f"geo.{nm} = {val!r} outside (0, 1)")
    for nm, val in (("phi12", geo.phi12), ("phi21", geo.phi21)):
        if not 0.0 <= val < 1.0:
            v.append(f"geo.{nm} = {val!r} outside [0, 1)")
    for nm, val in (
        ("xi1", geo.xi1),
        ("xi2", geo.xi2),
        ("eta", geo.eta),
        ("m_at_1750", geo.m_at_1750),
    ):
        if not val > 0.0:
            v.append(f"geo.{nm} = {val!r} must be positive")

    if len(scenario.region_names) != n:
        v.append("region_names length does not match regions")
    if scenario.developed.shape != (n,):
        v.append("developed flags length does not match regions")
    if scenario.damage_loss_2c.shape != (n,):
        v.append("damage_loss_2c length does not match regions")
    for i, r in enumerate(scenario.regions):
        tag = f"regions[{i}]"
        if not 0.0 < r.gamma < 1.0:
            v.append(f"{tag}.gamma = {r.gamma!r} outside (0, 1)")
        if not 0.0 <= r.delta_k <= 1.0:
            v.append(f"{tag}.delta_k = {r.delta_k!r} outside [0, 1]")
        if not r.alpha > 0.0:
            v.append(f"{tag}.alpha = {r.alpha!r} must be positive")
        if not r.rho >= 0.0:
            v.append(f"{tag}.rho = {r.rho!r} must be nonnegative")
        if not r.a2 >= 0.0:
            v.append(f"{tag}.a2 = {r.a2!r} must be nonnegative")
        if not r.theta2 > 1.0:
            v.append(f"{tag}.theta2 = {r.theta2!r} must exceed 1")
        if not r.pb > 0.0:
            v.append(f"{tag}.pb = {r.pb!r} must be positive")
        if not 0.0 <= r.delta_pb < 1.0:
            v.append(f"{tag}.delta_pb = {r.delta_pb!r} outside [0, 1)")
        if i < scenario.damage_loss_2c.size:
            implied = r.a1 * 2.0 + r.a2 * 2.0**r.a3
            ref = scenario.damage_loss_2c[i]
            if abs(implied - ref) > 1e-9:
                v.append(
                    f"{tag} damage at 2 degC is {implied!r}, reference loss"
                    f" is {ref!r} (tolerance 1e-9)"
                )

    exo = scenario.exo
    if exo.n_regions != n:
        v.append("exogenous paths region count does not match regions")
    for nm, arr in (
        ("tfp", exo.tfp),
        ("labor", exo.labor),
        ("sigma", exo.sigma),
        ("e_land", exo.e_land),
        ("f_ex", exo.f_ex),
    ):
        if not np.all(np.isfinite(arr)):
            v.append(f"exogenous {nm} contains non-finite values")
    if np.any(exo.tfp <= 0.0):
        v.append("exogenous tfp must be positive everywhere")
    if np.any(exo.labor <= 0.0):
        v.append("exogenous labor must be positive everywhere")
    if np.any(exo.sigma < 0.0):
        v.append("exogenous sigma must be nonnegative")
    if np.any(exo.e_land < 0.0):
        v.append("exogenous e_land must be nonnegative")
    if scenario.horizon < 1:
        v.append(f"horizon = {scenario.horizon} must be at least 1")
    if exo.length < scenario.horizon + 1:
        v.append(
            f"exogenous length {exo.length} does not cover horizon"
            f" {scenario.horizon} (needs horizon + 1)"
        )

    x0 = scenario.x0
    for nm, val in (("t_at", x0.t_at), ("t_lo", x0.t_lo)):
        if not np.isfinite(val):
            v.append(f"initial {nm} is not finite")
    for nm, val in (("m_at", x0.m_at), ("m_up", x0.m_up), ("m_lo", x0.m_lo)):
        if not val > 0.0:
            v.append(f"initial {nm} = {val!r} must be positive")
    if x0.capital.shape != (n,):
        v.append("initial capital length does not match regions")
    elif np.any(x0.capital <= 0.0):
        v.append("initial capital must be positive everywhere")

    w = scenario.weights
    if w.shape != (n,):
        v.append("weights length does not match regions")
    else:
        if np.any(w <= 0.0):
            v.append("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            v.append(f"weights sum to {w.sum()!r}, not 1 within 1e-9")

    if tuple(scenario.region_names) == CANONICAL_REGIONS:
        got = [bool(b) for b in scenario.developed]
        expect = [nm in CANONICAL_DEVELOPED for nm in CANONICAL_REGIONS]
        if got != expect:
            v.append(
                "developed cluster must be exactly {US, EU, Japan, OHI}"
                " for the canonical 12 regions"
            )

    s_lo, s_hi = scenario.s_bounds
    mu_lo, mu_hi = scenario.mu_bounds
    if not 0.0 <= s_lo < s_hi <= 1.0:
        v.append(f"savings bounds ({s_lo!r}, {s_hi!r}) invalid")
    if not 0.0 <= mu_lo < mu_hi <= 1.0:
        v.append(f"mu bounds ({mu_lo!r}, {mu_hi!r}) invalid")
    return v


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------


def _require(mapping: dict, keys: tuple[str, ...], path: str) -> None:
    unknown = set(mapping) - set(keys)
    if unknown:
        raise ScenarioFormatError(
            f"unknown key {path}.{sorted(unknown)[0]!r} in scenario file"
        )
    missing = set(keys) - set(mapping)
    if missing:
        raise ScenarioFormatError(
            f"missing key {path}.{sorted(missing)[0]!r} in scenario file"
        )


_GEO_KEYS = (
    "zeta11",
    "zeta12",
    "zeta21",
    "zeta22",
    "zeta23",
    "zeta32",
    "zeta33",
    "xi1_gtc_per_gtco2",
    "phi11",
    "phi12",
    "phi21",
    "phi22",
    "xi2_degc_per_wm2",
    "eta_wm2_per_doubling",
    "m_at_1750_gtc",
)

_REGION_KEYS = (
    "name",
    "developed",
    "gamma",
    "delta_k_per_year",
    "alpha",
    "rho_per_year",
    "a1",
    "a2",
    "a3",
    "damage_loss_at_2c",
    "theta2",
    "pb_usd_per_tco2",
    "delta_pb_per_step",
)

_EXO_REGION_KEYS = (
    "tfp0",
    "tfp_growth0_per_step",
    "tfp_growth_decline_per_step",
    "pop0_millions",
    "pop_asymptote_millions",
    "pop_convergence_per_step",
    "sigma0_gtco2_per_trillion_usd",
    "sigma_decline_per_step",
    "e_land0_gtco2_per_year",
    "e_land_decline_per_step",
)

_EXO_KEYS = ("length", "f_ex_start_wm2", "f_ex_end_wm2", "f_ex_ramp_steps", "regions")

_STATE_KEYS = (
    "t_at_degc",
    "t_lo_degc",
    "m_at_gtc",
    "m_up_gtc",
    "m_lo_gtc",
    "capital_trillion_usd",
)

_BOUNDS_KEYS = ("s_min", "s_max", "mu_min", "mu_max")

_TOP_KEYS = (
    "schema_version",
    "horizon",
    "geo",
    "regions",
    "exogenous",
    "initial_state",
    "weights",
    "bounds",
)


def parse_scenario(doc: dict) -> Scenario:
    """Build a Scenario from a parsed scenario document.

    Raises :class:`ScenarioFormatError` on structural problems (wrong
    version, unknown or missing keys, mismatched lengths). Semantic
    invariants are checked separately by :func:`validate_scenario`.
    """
    if not isinstance(doc, dict):
        raise ScenarioFormatError("scenario document must be a JSON object")
    _require(doc, _TOP_KEYS, "$")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ScenarioFormatError(
            f"unsupported schema_version {doc['schema_version']!r},"
            f" expected {SCHEMA_VERSION}"
        )

    g = doc["geo"]
    _require(g, _GEO_KEYS, "geo")
    geo = GeoParams(
        zeta11=float(g["zeta11"]),
        zeta12=float(g["zeta12"]),
        zeta21=float(g["zeta21"]),
        zeta22=float(g["zeta22"]),
        zeta23=float(g["zeta23"]),
        zeta32=float(g["zeta32"]),
        zeta33=float(g["zeta33"]),
        xi1=float(g["xi1_gtc_per_gtco2"]),
        phi11=float(g["phi11"]),
        phi12=float(g["phi12"]),
        phi21=float(g["phi21"]),
        phi22=float(g["phi22"]),
        xi2=float(g["xi2_degc_per_wm2"]),
        eta=float(g["eta_wm2_per_doubling"]),
        m_at_1750=float(g["m_at_1750_gtc"]),
    )

    if not isinstance(doc["regions"], list) or not doc["regions"]:
        raise ScenarioFormatError("regions must be a non-empty list")
    regions = []
    names = []
    developed = []
    losses = []
    for idx, r in enumerate(doc["regions"]):
        _require(r, _REGION_KEYS, f"regions[{idx}]")
        names.append(str(r["name"]))
        developed.append(bool(r["developed"]))
        losses.append(float(r["damage_loss_at_2c"]))
        regions.append(
            RegionParams(
                gamma=float(r["gamma"]),
                delta_k=float(r["delta_k_per_year"]),
                alpha=float(r["alpha"]),
                rho=float(r["rho_per_year"]),
                a1=float(r["a1"]),
                a2=float(r["a2"]),
                a3=float(r["a3"]),
                theta2=float(r["theta2"]),
                pb=float(r["pb_usd_per_tco2"]),
                delta_pb=float(r["delta_pb_per_step"]),
            )
        )

    e = doc["exogenous"]
    _require(e, _EXO_KEYS, "exogenous")
    if len(e["regions"]) != len(regions):
        raise ScenarioFormatError(
            "exogenous.regions length does not match regions length"
        )
    growth = []
    for idx, er in enumerate(e["regions"]):
        _require(er, _EXO_REGION_KEYS, f"exogenous.regions[{idx}]")
        growth.append(
            RegionGrowthSpec(
                tfp0=float(er["tfp0"]),
                tfp_growth0=float(er["tfp_growth0_per_step"]),
                tfp_growth_decline=float(er["tfp_growth_decline_per_step"]),
                pop0=float(er["pop0_millions"]),
                pop_asymptote=float(er["pop_asymptote_millions"]),
                pop_convergence=float(er["pop_convergence_per_step"]),
                sigma0=float(er["sigma0_gtco2_per_trillion_usd"]),
                sigma_decline=float(er["sigma_decline_per_step"]),
                e_land0=float(er["e_land0_gtco2_per_year"]),
                e_land_decline=float(er["e_land_decline_per_step"]),
            )
        )
    exo_spec = ExogenousGrowthSpec(
        regions=tuple(growth),
        f_ex_start=float(e["f_ex_start_wm2"]),
        f_ex_end=float(e["f_ex_end_wm2"]),
        f_ex_ramp_steps=int(e["f_ex_ramp_steps"]),
        length=int(e["length"]),
    )

    st = doc["initial_state"]
    _require(st, _STATE_KEYS, "initial_state")
    capital = np.array([float(x) for x in st["capital_trillion_usd"]])
    if capital.size != len(regions):
        raise ScenarioFormatError(
            "initial_state.capital_trillion_usd length does not match regions"
        )
    x0 = RiceState(
        t_at=float(st["t_at_degc"]),
        t_lo=float(st["t_lo_degc"]),
        m_at=float(st["m_at_gtc"]),
        m_up=float(st["m_up_gtc"]),
        m_lo=float(st["m_lo_gtc"]),
        capital=capital,
    )

    weights = np.array([float(x) for x in doc["weights"]])
    if weights.size != len(regions):
        raise ScenarioFormatError("weights length does not match regions")

    b = doc["bounds"]
    _require(b, _BOUNDS_KEYS, "bounds")

    return Scenario(
        geo=geo,
        regions=regions,
        exo=generate_exogenous(exo_spec),
        x0=x0,
        horizon=int(doc["horizon"]),
        weights=weights,
        region_names=names,
        developed=np.array(developed, dtype=bool),
        damage_loss_2c=np.array(losses),
        s_bounds=(float(b["s_min"]), float(b["s_max"])),
        mu_bounds=(float(b["mu_min"]), float(b["mu_max"])),
        exo_spec=exo_spec,
    )


def serialize_scenario(scenario: Scenario) -> dict:
    """Turn a Scenario back into a scenario document (JSON-ready dict).

    Requires the scenario to carry its exogenous growth spec (scenarios
    built from files always do).
    """
    spec = scenario.exo_spec
    if not isinstance(spec, ExogenousGrowthSpec):
        raise ModelDomainError(
            "scenario has no exogenous growth spec; cannot serialize"
        )
    geo = scenario.geo
    doc = {
        "schema_version": SCHEMA_VERSION,
        "horizon": scenario.horizon,
        "geo": {
            "zeta11": geo.zeta11,
            "zeta12": geo.zeta12,
            "zeta21": geo.zeta21,
            "zeta22": geo.zeta22,
            "zeta23": geo.zeta23,
            "zeta32": geo.zeta32,
            "zeta33": geo.zeta33,
            "xi1_gtc_per_gtco2": geo.xi1,
            "phi11": geo.phi11,
            "phi12": geo.phi12,
            "phi21": geo.phi21,
            "phi22": geo.phi22,
            "xi2_degc_per_wm2": geo.xi2,
            "eta_wm2_per_doubling": geo.eta,
            "m_at_1750_gtc": geo.m_at_1750,
        },
        "regions": [
            {
                "name": scenario.region_names[i],
                "developed": bool(scenario.developed[i]),
                "gamma": r.gamma,
                "delta_k_per_year": r.delta_k,
                "alpha": r.alpha,
                "rho_per_year": r.rho,
                "a1": r.a1,
                "a2": r.a2,
                "a3": r.a3,
                "damage_loss_at_2c": float(scenario.damage_loss_2c[i]),
                "theta2": r.theta2,
                "pb_usd_per_tco2": r.pb,
                "delta_pb_per_step": r.delta_pb,
            }
            for i, r in enumerate(scenario.regions)
        ],
        "exogenous": {
            "length": spec.length,
            "f_ex_start_wm2": spec.f_ex_start,
            "f_ex_end_wm2": spec.f_ex_end,
            "f_ex_ramp_steps": spec.f_ex_ramp_steps,
            "regions": [
                {
                    "tfp0": g.tfp0,
                    "tfp_growth0_per_step": g.tfp_growth0,
                    "tfp_growth_decline_per_step": g.tfp_growth_decline,
                    "pop0_millions": g.pop0,
                    "pop_asymptote_millions": g.pop_asymptote,
                    "pop_convergence_per_step": g.pop_convergence,
                    "sigma0_gtco2_per_trillion_usd": g.sigma0,
                    "sigma_decline_per_step": g.sigma_decline,
                    "e_land0_gtco2_per_year": g.e_land0,
                    "e_land_decline_per_step": g.e_land_decline,
                }
                for g in spec.regions
            ],
        },
        "initial_state": {
            "t_at_degc": scenario.x0.t_at,
            "t_lo_degc": scenario.x0.t_lo,
            "m_at_gtc": scenario.x0.m_at,
            "m_up_gtc": scenario.x0.m_up,
            "m_lo_gtc": scenario.x0.m_lo,
            "capital_trillion_usd": [float(k) for k in scenario.x0.capital],
        },
        "weights": [float(w) for w in scenario.weights],
        "bounds": {
            "s_min": scenario.s_bounds[0],
            "s_max": scenario.s_bounds[1],
            "mu_min": scenario.mu_bounds[0],
            "mu_max": scenario.mu_bounds[1],
        },
    }
    return doc


def load_scenario(path) -> Scenario:
    """Parse a scenario file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(f"scenario file is not valid JSON: {exc}") from exc
    return parse_scenario(doc)


def save_scenario(scenario: Scenario, path) -> None:
    """Write a scenario file; floats round-trip exactly."""
    doc = serialize_scenario(scenario)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


def build_default_scenario(horizon: int | None = None) -> Scenario:
    """Load the packaged 12-region default scenario.

    ``horizon`` overrides the file's default planning horizon (the
    exogenous paths must still cover it).
    """
    ref = resources.files("rice_game").joinpath("data/default_scenario.json")
    doc = json.loads(ref.read_text(encoding="utf-8"))
    scenario = parse_scenario(doc)
    if horizon is not None:
        scenario = dataclasses.replace(scenario, horizon=int(horizon))
    return scenario
