"""Non-cooperative play: best responses, open-loop Nash, feedback horizon play.

The recursive best-response algorithm starts from a cooperative profile
and repeats simultaneous (Jacobi) rounds in which every region maximizes
its own welfare against the others' previous-round controls. A candidate
profile earns an epsilon-Nash certificate when no region can improve its
welfare by more than epsilon (relative) through unilateral deviation. The
receding-horizon feedback variant re-plans a short window every step
against opponents frozen at their current controls.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (
    ControlProfile,
    ModelDomainError,
    RiceState,
    Scenario,
    Trajectory,
    _utilities,
    simulate,
    step,
)
from .solver import SolveOptions, SolveReport, WindowProblem, maximize

__all__ = [
    "BestResponseResult",
    "Episode",
    "RbaResult",
    "NeCertificate",
    "RhfaResult",
    "best_response",
    "rba_dg",
    "verify_epsilon_ne",
    "rhfa_dg",
]


@dataclass
class BestResponseResult:
    """Region i's welfare-maximizing controls against a fixed profile."""

    region: int
    controls: np.ndarray
    welfare: float
    report: SolveReport


@dataclass
class Episode:
    """One Jacobi round: the updated profile and distances to the previous."""

    index: int
    profile: np.ndarray
    welfare: np.ndarray
    distance_inf: float
    distance_2: float


@dataclass
class RbaResult:
    """Recursive best-response outcome with the full episode log."""

    profile: ControlProfile
    trajectory: Trajectory
    episodes: list
    converged: bool


@dataclass
class NeCertificate:
    """Unilateral-deviation audit of a candidate equilibrium.

    ``epsilon`` is the largest relative welfare gain any region can
    secure by best-responding to the candidate.
    """

    welfare: np.ndarray
    best_response_welfare: np.ndarray
    relative_gain: np.ndarray
    epsilon: float


@dataclass
class RhfaResult:
    """Receding-horizon feedback play outcome."""

    profile: ControlProfile
    trajectory: Trajectory
    t_rh: int


def _regional_welfares(scenario: Scenario, traj: Trajectory) -> np.ndarray:
    return _utilities(scenario, traj.consumption, 0).sum(axis=0)


def best_response(
    scenario: Scenario,
    region: int,
    profile: ControlProfile,
    options: SolveOptions | None = None,
) -> BestResponseResult:
    """Maximize region's own welfare with all other regions frozen.

    Warm-starts from the region's own slice of ``profile``; solver
    failures surface in the attached report rather than raising.
    """
    n = scenario.n_regions
    if not 0 <= region < n:
        raise ModelDomainError("region index out of range")
    opts = options or SolveOptions()
    steps = profile.horizon + 1
    weights = np.zeros(n)
    weights[region] = 1.0
    problem = WindowProblem(
        scenario,
        weights,
        scenario.x0,
        0,
        steps,
        free_regions=[region],
        fixed=profile.controls,
    )
    init = problem.extract(profile.controls)
    report = maximize(problem, problem.lower, problem.upper, init, opts)
    return BestResponseResult(
        region=region,
        controls=report.x.reshape(steps, 2).copy(),
        welfare=report.objective,
        report=report,
    )


def _br_worker(args):
    scenario, region, controls, options = args
    result = best_response(scenario, region, ControlProfile(controls), options)
    return region, result.controls, result.welfare


def _jacobi_round(
    scenario: Scenario, controls: np.ndarray, options: SolveOptions, threads: int
) -> np.ndarray:
    n = scenario.n_regions
    new = np.empty_like(controls)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for region, ctrl, _ in pool.map(
                _br_worker, [(scenario, i, controls, options) for i in range(n)]
            ):
                new[region] = ctrl
    else:
        for i in range(n):
            res = best_response(scenario, i, ControlProfile(controls), options)
            new[i] = res.controls
    return new


def rba_dg(
    scenario: Scenario,
    episodes: int = 21,
    options: SolveOptions | None = None,
    initial_profile: ControlProfile | None = None,
    threads: int = 1,
    stop_tol: float = 1e-6,
    update: str = "jacobi",
) -> RbaResult:
    """Recursive best-response toward an open-loop Nash equilibrium.

    Starts from ``initial_profile`` (defaults to the cooperative
    social-welfare optimum) and plays up to ``episodes`` simultaneous
    best-response rounds, stopping early when consecutive profiles are
    within ``stop_tol`` in the infinity norm. ``update`` may be
    ``"jacobi"`` (simultaneous, default) or ``"gauss-seidel"``
    (sequential in region order).
    """
    if update not in ("jacobi", "gauss-seidel"):
        raise ModelDomainError("update must be 'jacobi' or 'gauss-seidel'")
    opts = options or SolveOptions()
    if initial_profile is None:
        from .cooperative import solve_swm

        initial_profile = solve_swm(scenario).profile
    controls = initial_profile.controls.copy()
    traj = simulate(scenario.x0, ControlProfile(controls), scenario)
    log = [
        Episode(
            index=0,
            profile=controls.copy(),
            welfare=_regional_welfares(scenario, traj),
            distance_inf=float("nan"),
            distance_2=float("nan"),
        )
    ]
    converged = False
    for k in range(1, episodes + 1):
        if update == "jacobi":
            new = _jacobi_round(scenario, controls, opts, threads)
        else:
            new = controls.copy()
            for i in range(scenario.n_regions):
                res = best_response(scenario, i, ControlProfile(new), opts)
                new[i] = res.controls
        dist_inf = float(np.max(np.abs(new - controls)))
        dist_2 = float(np.linalg.norm((new - controls).ravel()))
        controls = new
        traj = simulate(scenario.x0, ControlProfile(controls), scenario)
        log.append(
            Episode(
                index=k,
                profile=controls.copy(),
                welfare=_regional_welfares(scenario, traj),
                distance_inf=dist_inf,
                distance_2=dist_2,
            )
        )
        if dist_inf < stop_tol:
            converged = True
            break
    return RbaResult(
        profile=ControlProfile(controls),
        trajectory=simulate(scenario.x0, ControlProfile(controls), scenario),
        episodes=log,
        converged=converged,
    )


def verify_epsilon_ne(
    scenario: Scenario,
    profile: ControlProfile,
    options: SolveOptions | None = None,
    threads: int = 1,
) -> NeCertificate:
    """Measure the largest relative unilateral improvement on ``profile``."""
    opts = options or SolveOptions()
    n = scenario.n_regions
    traj = simulate(scenario.x0, profile, scenario)
    welfare = _regional_welfares(scenario, traj)
    br_welfare = np.empty(n)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for region, _, wf in pool.map(
                _br_worker, [(scenario, i, profile.controls, opts) for i in range(n)]
            ):
                br_welfare[region] = wf
    else:
        for i in range(n):
            br_welfare[i] = best_response(scenario, i, profile, opts).welfare
    # maximize() guarantees br_welfare >= welfare (init is the own slice).
    gains = (br_welfare - welfare) / np.abs(welfare)
    return NeCertificate(
        welfare=welfare,
        best_response_welfare=br_welfare,
        relative_gain=gains,
        epsilon=float(gains.max()),
    )


def _rhfa_worker(args):
    scenario, region, x_vec, t0, t_rh, fixed, init, options = args
    weights = np.zeros(scenario.n_regions)
    weights[region] = 1.0
    problem = WindowProblem(
        scenario,
        weights,
        RiceState.from_vector(x_vec),
        t0,
        t_rh,
        free_regions=[region],
        fixed=fixed,
    )
    report = maximize(problem, problem.lower, problem.upper, init, options)
    return region, report.x.reshape(t_rh, 2)


def rhfa_dg(
    scenario: Scenario,
    t_sim: int,
    t_rh: int,
    options: SolveOptions | None = None,
    initial_controls: np.ndarray | None = None,
    threads: int = 1,
) -> RhfaResult:
    """Receding-horizon feedback play of the dynamic game.

    Step 0 plays ``initial_controls`` (defaults to the cooperative
    optimum's first controls). After playing step t, every region plans
    its own controls over [t+1, t+t_rh] against the others frozen at
    their just-played controls, keeps only the first planned control, and
    the game advances. Plans beyond the first step are discarded from the
    game (they only seed the next round's solver).
    """
    if t_sim < 1 or t_rh < 1:
        raise ModelDomainError("t_sim and t_rh must be at least 1")
    if t_sim + t_rh + 1 > scenario.exo.length:
        raise ModelDomainError(
            "exogenous paths do not cover t_sim + t_rh; extend the scenario"
        )
    opts = options or SolveOptions()
    n = scenario.n_regions
    if initial_controls is None:
        from .cooperative import solve_swm

        initial_controls = solve_swm(scenario).profile.controls[:, 0, :]
    initial_controls = np.asarray(initial_controls, dtype=float)
    if initial_controls.shape != (n, 2):
        raise ModelDomainError("initial controls must have shape (n, 2)")

    played = np.empty((n, t_sim + 1, 2))
    played[:, 0, :] = initial_controls
    x, _ = step(0, scenario.x0, initial_controls, scenario)
    prev_plans = np.repeat(initial_controls[:, None, :], t_rh, axis=1)

    for t in range(t_sim):
        current = played[:, t, :]
        fixed = np.repeat(current[:, None, :], t_rh, axis=1)
        inits = np.concatenate(
            [prev_plans[:, 1:, :], prev_plans[:, -1:, :]], axis=1
        )
        plans = np.empty((n, t_rh, 2))
        if threads > 1:
            args = [
                (scenario, i, x.to_vector(), t + 1, t_rh, fixed, inits[i].ravel(), opts)
                for i in range(n)
            ]
            with ProcessPoolExecutor(max_workers=threads) as pool:
                for region, plan in pool.map(_rhfa_worker, args):
                    plans[region] = plan
        else:
            for i in range(n):
                _, plan = _rhfa_worker(
                    (scenario, i, x.to_vector(), t + 1, t_rh, fixed, inits[i].ravel(), opts)
                )
                plans[i] = plan
        played[:, t + 1, :] = plans[:, 0, :]
        x, _ = step(t + 1, x, plans[:, 0, :], scenario)
        prev_plans = plans

    profile = ControlProfile(played)
    return RhfaResult(
        profile=profile,
        trajectory=simulate(scenario.x0, profile, scenario),
        t_rh=t_rh,
    )
