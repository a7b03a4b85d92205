"""Deterministic dynamics and payoffs of the RICE climate-economy game.

The world is split into n regions (12 in the shipped scenario) that share a
global carbon cycle and temperature response. Time advances in 5-year steps,
``year(t) = 2020 + 5 t``. The state stacks global temperatures (degC above
1750), carbon stocks (GtC) and per-region capital (trillions of 2005 USD):

    x = [T_AT, T_LO, M_AT, M_UP, M_LO, K_1, ..., K_n]

Each region controls a savings rate ``s_i(t)`` and an emission-control rate
``mu_i(t)``, both in [0, 1]. Everything here is pure and deterministic; the
same inputs reproduce trajectories bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CONSUMPTION_FLOOR",
    "STEP_YEARS",
    "YEAR_ZERO",
    "RiceGameError",
    "ModelDomainError",
    "ModelBreakdownError",
    "SimulationError",
    "GeoParams",
    "RegionParams",
    "ExogenousPaths",
    "RiceState",
    "RegionControl",
    "ControlProfile",
    "Trajectory",
    "Scenario",
    "radiative_forcing",
    "step_carbon",
    "step_temperature",
    "gross_output",
    "backstop_theta1",
    "abatement_fraction",
    "damage_fraction",
    "global_emissions",
    "step_capital",
    "utility",
    "step",
    "simulate",
    "regional_welfare",
    "weighted_welfare",
    "social_cost_of_co2",
]

#: Calendar year of step 0 and length of one step in years.
YEAR_ZERO = 2020
STEP_YEARS = 5

#: Floor applied to per-capita consumption (trillion USD per million people)
#: before the utility evaluation, guarding degenerate profiles. The floor
#: breaks differentiability; marginal utility is taken as zero on floored
#: entries.
CONSUMPTION_FLOOR = 1e-6


class RiceGameError(Exception):
    """Base class for all errors raised by this package."""


class ModelDomainError(RiceGameError):
    """An input violates a documented precondition (bad shape, sign, range)."""


class ModelBreakdownError(RiceGameError):
    """The model left its economic domain (damage or abatement fraction <= 0).

    Attributes
    ----------
    step : int
        Absolute time step at which the breakdown occurred.
    region : int or None
        Offending region index, when attributable to a single region.
    """

    def __init__(self, message, step, region=None):
        super().__init__(message)
        self.step = step
        self.region = region


class SimulationError(RiceGameError):
    """A trajectory rollout aborted; ``step`` holds the first failing step."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


# ---------------------------------------------------------------------------
# Parameter and state containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeoParams:
    """Shared geophysical constants.

    The seven ``zeta`` entries form the column-stochastic 3x3 carbon
    transition matrix (atmosphere, upper ocean, lower ocean); the four
    ``phi`` entries form the 2x2 temperature response. ``xi1`` converts
    one step of global emissions (GtCO2/yr) into atmospheric GtC, ``xi2``
    converts forcing (W/m^2) into atmospheric warming per step, ``eta`` is
    the forcing per doubling of atmospheric carbon and ``m_at_1750`` the
    preindustrial stock (GtC).
    """

    zeta11: float
    zeta12: float
    zeta21: float
    zeta22: float
    zeta23: float
    zeta32: float
    zeta33: float
    xi1: float
    phi11: float
    phi12: float
    phi21: float
    phi22: float
    xi2: float
    eta: float
    m_at_1750: float

    def carbon_matrix(self) -> np.ndarray:
        """3x3 carbon transition matrix in (M_AT, M_UP, M_LO) order."""
        return np.array(
            [
                [self.zeta11, self.zeta12, 0.0],
                [self.zeta21, self.zeta22, self.zeta23],
                [0.0, self.zeta32, self.zeta33],
            ]
        )

    def temperature_matrix(self) -> np.ndarray:
        """2x2 temperature transition matrix in (T_AT, T_LO) order."""
        return np.array([[self.phi11, self.phi12], [self.phi21, self.phi22]])


@dataclass(frozen=True)
class RegionParams:
    """Per-region economic constants.

    ``gamma`` is the capital elasticity, ``delta_k`` the yearly capital
    depreciation, ``alpha`` the CRRA elasticity, ``rho`` the yearly pure
    rate of time preference, ``(a1, a2, a3)`` the damage coefficients,
    ``theta2`` the abatement-cost exponent, ``pb`` the 2020 backstop price
    (USD per tCO2) and ``delta_pb`` its per-step decline rate.
    """

    gamma: float
    delta_k: float
    alpha: float
    rho: float
    a1: float
    a2: float
    a3: float
    theta2: float
    pb: float
    delta_pb: float


@dataclass(frozen=True)
class ExogenousPaths:
    """Exogenous driver paths, time-major.

    ``tfp``, ``labor``, ``sigma`` and ``e_land`` have shape (length, n):
    total factor productivity, population (millions), industrial emission
    intensity (GtCO2 per trillion USD of gross output) and land-use
    emissions (GtCO2/yr). ``f_ex`` has shape (length,): exogenous forcing
    (W/m^2).
    """

    tfp: np.ndarray
    labor: np.ndarray
    sigma: np.ndarray
    e_land: np.ndarray
    f_ex: np.ndarray

    @property
    def length(self) -> int:
        return self.tfp.shape[0]

    @property
    def n_regions(self) -> int:
        return self.tfp.shape[1]


@dataclass(frozen=True)
class RiceState:
    """Full model state at one step."""

    t_at: float
    t_lo: float
    m_at: float
    m_up: float
    m_lo: float
    capital: np.ndarray

    def to_vector(self) -> np.ndarray:
        """Stack into [T_AT, T_LO, M_AT, M_UP, M_LO, K_1..K_n]."""
        return np.concatenate(
            ([self.t_at, self.t_lo, self.m_at, self.m_up, self.m_lo], self.capital)
        )

    @staticmethod
    def from_vector(x: np.ndarray) -> "RiceState":
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size < 6:
            raise ModelDomainError("state vector must be 1-d with length >= 6")
        return RiceState(
            t_at=float(x[0]),
            t_lo=float(x[1]),
            m_at=float(x[2]),
            m_up=float(x[3]),
            m_lo=float(x[4]),
            capital=np.array(x[5:], dtype=float),
        )


@dataclass(frozen=True)
class RegionControl:
    """One region's control at one step: savings rate and emission control."""

    s: float
    mu: float


@dataclass(frozen=True)
class ControlProfile:
    """Joint open-loop control path.

    ``controls`` has shape (n, T+1, 2) with ``controls[i, t, 0]`` the
    savings rate and ``controls[i, t, 1]`` the emission-control rate of
    region i at step t. Flattening with ``ravel()`` yields the
    region-major, time-minor, [s, mu] decision-vector order.
    """

    controls: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.controls, dtype=float)
        if c.ndim != 3 or c.shape[2] != 2:
            raise ModelDomainError("controls must have shape (n, T+1, 2)")
        object.__setattr__(self, "controls", c)

    @property
    def n_regions(self) -> int:
        return self.controls.shape[0]

    @property
    def horizon(self) -> int:
        """T such that controls cover steps 0..T."""
        return self.controls.shape[1] - 1

    @property
    def saving(self) -> np.ndarray:
        """(n, T+1) view of savings rates."""
        return self.controls[:, :, 0]

    @property
    def mu(self) -> np.ndarray:
        """(n, T+1) view of emission-control rates."""
        return self.controls[:, :, 1]

    def control(self, i: int, t: int) -> RegionControl:
        return RegionControl(
            s=float(self.controls[i, t, 0]), mu=float(self.controls[i, t, 1])
        )

    @staticmethod
    def constant(n: int, horizon: int, s: float, mu: float) -> "ControlProfile":
        c = np.empty((n, horizon + 1, 2))
        c[:, :, 0] = s
        c[:, :, 1] = mu
        return ControlProfile(c)


@dataclass(frozen=True)
class Trajectory:
    """Simulated rollout with per-step diagnostics.

    ``states`` has shape (T+2, 5+n): rows are state vectors for steps
    0..T+1. The flow arrays have shape (T+1, n): gross output Y, net
    output Q, consumption C (trillions USD/yr), abatement fraction Lambda,
    damage fraction Omega, per-region emissions (GtCO2/yr, including
    land use). ``total_emissions`` and ``forcing`` have shape (T+1,).
    ``consumption_floored`` marks entries where per-capita consumption hit
    the floor inside the payoff.
    """

    states: np.ndarray
    gross_output: np.ndarray
    net_output: np.ndarray
    consumption: np.ndarray
    abatement_fraction: np.ndarray
    damage_fraction: np.ndarray
    emissions: np.ndarray
    total_emissions: np.ndarray
    forcing: np.ndarray
    consumption_floored: np.ndarray

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 2

    @property
    def n_regions(self) -> int:
        return self.states.shape[1] - 5

    def state(self, t: int) -> RiceState:
        return RiceState.from_vector(self.states[t])


@dataclass
class Scenario:
    """Immutable-by-convention bundle of everything a rollout needs.

    Holds the shared geophysics, per-region parameters, exogenous paths,
    initial state, default horizon, welfare weights, control bounds and
    region metadata. Derived lookup tables are precomputed on
    construction; treat instances as frozen and use
    :func:`dataclasses.replace` to derive variants (the tables rebuild).
    """

    geo: GeoParams
    regions: list[RegionParams]
    exo: ExogenousPaths
    x0: RiceState
    horizon: int
    weights: np.ndarray
    region_names: list[str]
    developed: np.ndarray
    damage_loss_2c: np.ndarray
    s_bounds: tuple[float, float] = (0.05, 0.95)
    mu_bounds: tuple[float, float] = (0.0, 1.0)
    exo_spec: object = None

    # Derived tables, rebuilt by __post_init__.
    _zmat: np.ndarray = field(init=False, repr=False, compare=False)
    _phimat: np.ndarray = field(init=False, repr=False, compare=False)
    _gamma: np.ndarray = field(init=False, repr=False, compare=False)
    _alpha: np.ndarray = field(init=False, repr=False, compare=False)
    _a1: np.ndarray = field(init=False, repr=False, compare=False)
    _a2: np.ndarray = field(init=False, repr=False, compare=False)
    _a3: np.ndarray = field(init=False, repr=False, compare=False)
    _theta2: np.ndarray = field(init=False, repr=False, compare=False)
    _keep5: np.ndarray = field(init=False, repr=False, compare=False)
    _theta1: np.ndarray = field(init=False, repr=False, compare=False)
    _disc: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.regions)
        self.weights = np.asarray(self.weights, dtype=float)
        self.developed = np.asarray(self.developed, dtype=bool)
        self.damage_loss_2c = np.asarray(self.damage_loss_2c, dtype=float)
        self._zmat = self.geo.carbon_matrix()
        self._phimat = self.geo.temperature_matrix()
        self._gamma = np.array([r.gamma for r in self.regions])
        self._alpha = np.array([r.alpha for r in self.regions])
        self._a1 = np.array([r.a1 for r in self.regions])
        self._a2 = np.array([r.a2 for r in self.regions])
        self._a3 = np.array([r.a3 for r in self.regions])
        self._theta2 = np.array([r.theta2 for r in self.regions])
        self._keep5 = np.array(
            [(1.0 - r.delta_k) ** STEP_YEARS for r in self.regions]
        )
        length = self.exo.length
        pb = np.array([r.pb for r in self.regions])
        dpb = np.array([r.delta_pb for r in self.regions])
        if np.any(dpb >= 1.0):
            raise ModelDomainError("delta_pb must be < 1")
        tgrid = np.arange(length)[:, None]
        self._theta1 = (
            pb / (1000.0 * self._theta2) * (1.0 - dpb) ** (tgrid - 1) * self.exo.sigma
        )
        rho = np.array([r.rho for r in self.regions])
        self._disc = (1.0 + rho) ** (-STEP_YEARS * np.arange(length)[:, None])
        if self.exo.n_regions != n or self.x0.capital.size != n:
            raise ModelDomainError("region count mismatch across scenario parts")

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def theta1_at(self, t: int, i: int) -> float:
        """Backstop cost coefficient theta1 of region i at absolute step t."""
        return float(self._theta1[t, i])

    def year(self, t: int) -> int:
        return YEAR_ZERO + STEP_YEARS * t

    def control_lower(self) -> np.ndarray:
        return np.array([self.s_bounds[0], self.mu_bounds[0]])

    def control_upper(self) -> np.ndarray:
        return np.array([self.s_bounds[1], self.mu_bounds[1]])


# ---------------------------------------------------------------------------
# Scalar building blocks
# ---------------------------------------------------------------------------


def radiative_forcing(m_at: float, f_ex: float, geo: GeoParams) -> float:
    """Total forcing (W/m^2) from atmospheric carbon and exogenous sources."""
    if m_at <= 0.0:
        raise ModelDomainError("m_at must be positive")
    return geo.eta * math.log2(m_at / geo.m_at_1750) + f_ex


def step_carbon(m: np.ndarray, e_total: float, geo: GeoParams) -> np.ndarray:
    """Advance (M_AT, M_UP, M_LO) one step under total emissions e_total."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3,):
        raise ModelDomainError("carbon state must have shape (3,)")
    out = geo.carbon_matrix() @ m
    out[0] += geo.xi1 * e_total
    return out


def step_temperature(temp: np.ndarray, forcing: float, geo: GeoParams) -> np.ndarray:
    """Advance (T_AT, T_LO) one step under the given forcing."""
    temp = np.asarray(temp, dtype=float)
    if temp.shape != (2,):
        raise ModelDomainError("temperature state must have shape (2,)")
    out = geo.temperature_matrix() @ temp
    out[0] += geo.xi2 * forcing
    return out


def gross_output(a: float, k: float, l: float, gamma: float) -> float:
    """Cobb-Douglas gross output A * K^gamma * L^(1-gamma)."""
    if a <= 0.0 or k <= 0.0 or l <= 0.0:
        raise ModelDomainError("tfp, capital and labor must be positive")
    return a * k**gamma * l ** (1.0 - gamma)


def backstop_theta1(t: int, params: RegionParams, sigma_t: float) -> float:
    """Abatement cost coefficient theta1_i(t).

    Declines geometrically from the 2020 backstop price; the (t-1)
    exponent applies verbatim at every step including t = 0.
    """
    decay = 1.0 - params.delta_pb
    if decay == 0.0 and t == 0:
        raise ZeroDivisionError("delta_pb = 1 makes theta1 undefined at t = 0")
    return params.pb / (1000.0 * params.theta2) * decay ** (t - 1) * sigma_t


def abatement_fraction(mu: float, theta1: float, theta2: float) -> float:
    """Output fraction kept after abatement spending, 1 - theta1 * mu^theta2."""
    if not 0.0 <= mu <= 1.0:
        raise ModelDomainError("mu must lie in [0, 1]")
    return 1.0 - theta1 * mu**theta2


def damage_fraction(t_at: float, params: RegionParams) -> float:
    """Output fraction kept after climate damages, 1 - a1*T - a2*T^a3."""
    return 1.0 - params.a1 * t_at - params.a2 * t_at**params.a3


def global_emissions(
    outputs: np.ndarray, mus: np.ndarray, sigma_t: np.ndarray, e_land_t: np.ndarray
) -> float:
    """Total emissions (GtCO2/yr): sum of sigma*(1-mu)*Y plus land use."""
    outputs = np.asarray(outputs, dtype=float)
    mus = np.asarray(mus, dtype=float)
    return float(np.sum(sigma_t * (1.0 - mus) * outputs + e_land_t))


def step_capital(k: float, s: float, q_net: float, delta_k: float) -> float:
    """Capital recursion (1-delta_k)^5 * K + 5 * s * Q."""
    return (1.0 - delta_k) ** STEP_YEARS * k + STEP_YEARS * s * q_net


def utility(c: float, l: float, alpha: float, rho: float, t: int) -> float:
    """Discounted CRRA population utility of consuming c with population l.

    Per-capita consumption is floored at :data:`CONSUMPTION_FLOOR`. The
    alpha = 1 branch is logarithmic.
    """
    if c <= 0.0 or l <= 0.0:
        raise ModelDomainError("consumption and population must be positive")
    cpc = max(c / l, CONSUMPTION_FLOOR)
    if alpha == 1.0:
        base = l * math.log(cpc)
    else:
        base = l * (cpc ** (1.0 - alpha) - 1.0) / (1.0 - alpha)
    return base / (1.0 + rho) ** (STEP_YEARS * t)


# ---------------------------------------------------------------------------
# Vectorized rollout engine
# ---------------------------------------------------------------------------


def _check_controls(scenario: Scenario, s_tn: np.ndarray, mu_tn: np.ndarray):
    if np.any(s_tn < 0.0) or np.any(s_tn > 1.0) or np.any(mu_tn < 0.0) or np.any(
        mu_tn > 1.0
    ):
        raise ModelDomainError("controls must lie in [0, 1]")


def _forward(
    scenario: Scenario,
    x0_vec: np.ndarray,
    s_tn: np.ndarray,
    mu_tn: np.ndarray,
    t0: int = 0,
    check: bool = True,
    e_extra: np.ndarray | None = None,
):
    """Roll the dynamics forward. Controls are time-major (T+1, n).

    ``t0`` is the absolute step of the first control, used to index the
    exogenous paths and discount factors. ``e_extra`` optionally adds a
    (steps,) vector to total emissions (perturbation hook). Returns a dict
    of arrays; states has shape (T+2, 5+n).
    """
    n = scenario.n_regions
    steps = s_tn.shape[0]
    if s_tn.shape != (steps, n) or mu_tn.shape != (steps, n):
        raise ModelDomainError("controls must have shape (T+1, n)")
    if t0 < 0 or t0 + steps > scenario.exo.length:
        raise ModelDomainError(
            "exogenous paths do not cover steps"
            f" [{t0}, {t0 + steps - 1}] (length {scenario.exo.length})"
        )
    if check:
        _check_controls(scenario, s_tn, mu_tn)
        if np.any(x0_vec[2:] <= 0.0):
            raise ModelDomainError("carbon stocks and capital must be positive")

    exo = scenario.exo
    zmat = scenario._zmat
    phimat = scenario._phimat
    gamma = scenario._gamma
    a1, a2, a3 = scenario._a1, scenario._a2, scenario._a3
    theta2 = scenario._theta2
    keep5 = scenario._keep5
    eta = scenario.geo.eta
    m1750 = scenario.geo.m_at_1750
    xi1 = scenario.geo.xi1
    xi2 = scenario.geo.xi2
    log2 = math.log(2.0)

    states = np.empty((steps + 1, 5 + n))
    states[0] = x0_vec
    Y = np.empty((steps, n))
    Q = np.empty((steps, n))
    C = np.empty((steps, n))
    LAM = np.empty((steps, n))
    OM = np.empty((steps, n))
    EREG = np.empty((steps, n))
    ETOT = np.empty(steps)
    F = np.empty(steps)

    temp = x0_vec[0:2].copy()
    m = x0_vec[2:5].copy()
    k = x0_vec[5:].copy()

    for rel in range(steps):
        ta = t0 + rel
        tfp = exo.tfp[ta]
        labor = exo.labor[ta]
        sig = exo.sigma[ta]
        s_t = s_tn[rel]
        mu_t = mu_tn[rel]

        y = tfp * k**gamma * labor ** (1.0 - gamma)
        lam = 1.0 - scenario._theta1[ta] * mu_t**theta2
        om = 1.0 - a1 * temp[0] - a2 * temp[0] ** a3
        bad = (lam <= 0.0) | (om <= 0.0)
        if bad.any():
            i = int(np.argmax(bad))
            raise ModelBreakdownError(
                f"damage or abatement fraction <= 0 at step {ta}, region {i}"
                f" (omega = {om[i]:.6g}, lambda = {lam[i]:.6g})",
                step=ta,
                region=i,
            )
        q = om * lam * y
        c = (1.0 - s_t) * q
        ereg = sig * (1.0 - mu_t) * y + exo.e_land[ta]
        etot = float(ereg.sum())
        if e_extra is not None:
            etot += float(e_extra[rel])
        forcing = eta * math.log(m[0] / m1750) / log2 + exo.f_ex[ta]

        m_next = zmat @ m
        m_next[0] += xi1 * etot
        temp_next = phimat @ temp
        temp_next[0] += xi2 * forcing
        k_next = keep5 * k + STEP_YEARS * s_t * q

        Y[rel] = y
        Q[rel] = q
        C[rel] = c
        LAM[rel] = lam
        OM[rel] = om
        EREG[rel] = ereg
        ETOT[rel] = etot
        F[rel] = forcing
        temp, m, k = temp_next, m_next, k_next
        states[rel + 1, 0:2] = temp
        states[rel + 1, 2:5] = m
        states[rel + 1, 5:] = k

    labor_win = exo.labor[t0 : t0 + steps]
    cpc = C / labor_win
    floored = cpc < CONSUMPTION_FLOOR
    return {
        "states": states,
        "Y": Y,
        "Q": Q,
        "C": C,
        "LAM": LAM,
        "OM": OM,
        "EREG": EREG,
        "ETOT": ETOT,
        "F": F,
        "floored": floored,
    }


def _utilities(scenario: Scenario, consumption: np.ndarray, t0: int) -> np.ndarray:
    """Per-step discounted utilities, shape (steps, n). Floor applied."""
    steps = consumption.shape[0]
    labor = scenario.exo.labor[t0 : t0 + steps]
    alpha = scenario._alpha
    cpc = np.maximum(consumption / labor, CONSUMPTION_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        crra = labor * (cpc ** (1.0 - alpha) - 1.0) / (1.0 - alpha)
    logu = labor * np.log(cpc)
    base = np.where(alpha == 1.0, logu, crra)
    return base * scenario._disc[t0 : t0 + steps]


def _marginal_utilities(
    scenario: Scenario, consumption: np.ndarray, floored: np.ndarray, t0: int
) -> np.ndarray:
    """d(utility)/d(consumption), zero on floored entries. Shape (steps, n)."""
    steps = consumption.shape[0]
    labor = scenario.exo.labor[t0 : t0 + steps]
    cpc = np.maximum(consumption / labor, CONSUMPTION_FLOOR)
    dudc = cpc ** (-scenario._alpha) * scenario._disc[t0 : t0 + steps]
    return np.where(floored, 0.0, dudc)


def step(
    t: int, x: RiceState, u, scenario: Scenario
) -> tuple[RiceState, dict]:
    """Advance one step from state x at absolute step t under controls u.

    ``u`` is an (n, 2) array of [s, mu] rows or a sequence of
    :class:`RegionControl`. Returns the next state and a diagnostics dict
    with per-region Y, Q, C, Lambda, Omega, emissions and the scalar
    total emissions and forcing.
    """
    if isinstance(u, np.ndarray):
        uarr = np.asarray(u, dtype=float)
    else:
        uarr = np.array([[c.s, c.mu] for c in u], dtype=float)
    if uarr.shape != (scenario.n_regions, 2):
        raise ModelDomainError("controls must have shape (n, 2)")
    out = _forward(
        scenario,
        x.to_vector(),
        uarr[None, :, 0],
        uarr[None, :, 1],
        t0=t,
    )
    diag = {
        "gross_output": out["Y"][0],
        "net_output": out["Q"][0],
        "consumption": out["C"][0],
        "abatement_fraction": out["LAM"][0],
        "damage_fraction": out["OM"][0],
        "emissions": out["EREG"][0],
        "total_emissions": float(out["ETOT"][0]),
        "forcing": float(out["F"][0]),
    }
    return RiceState.from_vector(out["states"][1]), diag


def simulate(
    x0: RiceState, profile: ControlProfile, scenario: Scenario, t0: int = 0
) -> Trajectory:
    """Roll out the full horizon of ``profile`` from ``x0``.

    ``t0`` is the absolute step of the profile's first control. Raises
    :class:`SimulationError` (with the failing step attached) if the model
    breaks down along the way.
    """
    if profile.n_regions != scenario.n_regions:
        raise ModelDomainError("profile region count does not match scenario")
    try:
        out = _forward(
            scenario,
            x0.to_vector(),
            np.ascontiguousarray(profile.saving.T),
            np.ascontiguousarray(profile.mu.T),
            t0=t0,
        )
    except ModelBreakdownError as exc:
        raise SimulationError(str(exc), step=exc.step) from exc
    return Trajectory(
        states=out["states"],
        gross_output=out["Y"],
        net_output=out["Q"],
        consumption=out["C"],
        abatement_fraction=out["LAM"],
        damage_fraction=out["OM"],
        emissions=out["EREG"],
        total_emissions=out["ETOT"],
        forcing=out["F"],
        consumption_floored=out["floored"],
    )


def regional_welfare(
    traj: Trajectory, profile: ControlProfile, i: int, scenario: Scenario, t0: int = 0
) -> float:
    """Discounted welfare of region i along ``traj``.

    ``traj`` must be the rollout of ``profile`` (shapes are checked; the
    consumption stored in the trajectory already carries the
    (1 - s_i) factor and the mu_i abatement argument).
    """
    if traj.horizon != profile.horizon or traj.n_regions != profile.n_regions:
        raise ModelDomainError("trajectory is not consistent with profile")
    if not 0 <= i < scenario.n_regions:
        raise ModelDomainError("region index out of range")
    u = _utilities(scenario, traj.consumption, t0)
    return float(u[:, i].sum())


def weighted_welfare(
    traj: Trajectory,
    profile: ControlProfile,
    weights: np.ndarray,
    scenario: Scenario,
    t0: int = 0,
) -> float:
    """Weighted sum of regional welfares along ``traj``."""
    if traj.horizon != profile.horizon or traj.n_regions != profile.n_regions:
        raise ModelDomainError("trajectory is not consistent with profile")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (scenario.n_regions,):
        raise ModelDomainError("weights must have shape (n,)")
    u = _utilities(scenario, traj.consumption, t0)
    return float(u.sum(axis=0) @ weights)


def social_cost_of_co2(
    scenario: Scenario,
    x0: RiceState,
    profile: ControlProfile,
    i: int,
    t: int,
    eps: float = 1.0,
) -> float:
    """Social cost of CO2 for region i at step t (USD per tCO2).

    Both derivatives are central finite differences: the emissions
    derivative re-simulates with ``eps`` added to total emissions at step
    t, the consumption derivative adds a small amount to C_i(t) inside the
    payoff only. The ratio is scaled by -1000 to convert trillions of USD
    per GtCO2 into USD per tCO2.
    """
    if eps <= 0.0:
        raise ModelDomainError("eps must be positive")
    if not 0 <= t <= profile.horizon:
        raise ModelDomainError("step index out of range")
    s_tn = np.ascontiguousarray(profile.saving.T)
    mu_tn = np.ascontiguousarray(profile.mu.T)
    x0_vec = x0.to_vector()

    def welfare_with_injection(delta: float) -> float:
        extra = np.zeros(s_tn.shape[0])
        extra[t] = delta
        out = _forward(scenario, x0_vec, s_tn, mu_tn, 0, check=False, e_extra=extra)
        u = _utilities(scenario, out["C"], 0)
        return float(u[:, i].sum())

    dj_de = (welfare_with_injection(eps) - welfare_with_injection(-eps)) / (2.0 * eps)

    base = _forward(scenario, x0_vec, s_tn, mu_tn, 0)
    c = base["C"]
    eps_c = 1e-4 * c[t, i]
    if eps_c <= 0.0:
        raise ModelDomainError("consumption at (i, t) must be positive")

    def welfare_with_consumption(delta: float) -> float:
        cc = c.copy()
        cc[t, i] += delta
        u = _utilities(scenario, cc, 0)
        return float(u[:, i].sum())

    dj_dc = (welfare_with_consumption(eps_c) - welfare_with_consumption(-eps_c)) / (
        2.0 * eps_c
    )
    if abs(dj_dc) < 1e-300:
        raise ModelDomainError("consumption derivative vanished; SCC undefined")
    return -1000.0 * dj_de / dj_dc
