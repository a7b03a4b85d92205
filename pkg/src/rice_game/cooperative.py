"""Cooperative solution concepts: welfare maximization, Pareto frontier, MPC.

All solvers maximize discounted welfare sums over the scenario's control
box using the adjoint-gradient trajectory optimizer. The frontier
scalarizes the developed/developing cluster welfares; the receding-horizon
controller re-solves a short window at every step and plays its first
controls.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (
    ControlProfile,
    ModelDomainError,
    Scenario,
    Trajectory,
    _utilities,
    simulate,
    step,
)
from .solver import SolveOptions, SolveReport, WindowProblem, maximize

__all__ = [
    "SwmResult",
    "ParetoPoint",
    "FrontierResult",
    "MpcResult",
    "default_initial_profile",
    "solve_swm",
    "pareto_weights",
    "solve_pareto_point",
    "pareto_frontier",
    "mpc_rice",
]

# Resolution floor of the frontier pipeline, as a relative gap on cluster
# welfare. Two effects each leave gaps near 1e-6 relative: the quasi-Newton
# line search stalls once objective differences fall to about 1e-6 of the
# scalarized welfare regardless of the requested tolerances, and the
# own-welfare saving polish moves the other cluster by a comparable amount
# through the output and emissions channel. Genuine frontier defects show up
# around 1e-3 relative, three orders of magnitude above this floor.
AUDIT_REL_TOL = 3e-6


@dataclass
class SwmResult:
    """Social-welfare maximization outcome."""

    profile: ControlProfile
    trajectory: Trajectory
    welfare: float
    regional_welfare: np.ndarray
    report: SolveReport


@dataclass
class ParetoPoint:
    """One scalarization point of the developed/developing frontier."""

    p: float
    profile: ControlProfile
    welfare_developed: float
    welfare_developing: float
    terminal_t_at: float
    report: SolveReport


@dataclass
class FrontierResult:
    """All frontier points plus the non-domination audit.

    ``dominance_violations`` lists index pairs (i, j) where point i beats
    point j in both cluster welfares by more than the audit tolerance;
    ``failures`` records grid values whose solve raised, with the message.
    """

    points: list
    failures: list = field(default_factory=list)
    dominance_violations: list = field(default_factory=list)


@dataclass
class MpcResult:
    """Receding-horizon trajectory with per-window solver diagnostics."""

    profile: ControlProfile
    trajectory: Trajectory
    window_objectives: np.ndarray
    window_initial_objectives: np.ndarray


def default_initial_profile(scenario: Scenario, steps: int) -> np.ndarray:
    """Standard cold start: s = 0.25 and mu = 0.1, clipped into the box."""
    lo, hi = scenario.control_lower(), scenario.control_upper()
    u = np.clip(np.array([0.25, 0.1]), lo, hi)
    full = np.empty((scenario.n_regions, steps, 2))
    full[:, :, :] = u
    return full


def _cluster_welfares(
    scenario: Scenario, traj: Trajectory, profile: ControlProfile
) -> tuple[float, float]:
    """Summed welfare of the developed and developing clusters."""
    util = _utilities(scenario, traj.consumption, 0).sum(axis=0)
    dev = float(util[scenario.developed].sum())
    devg = float(util[~scenario.developed].sum())
    return dev, devg


def solve_swm(
    scenario: Scenario,
    options: SolveOptions | None = None,
    weights: np.ndarray | None = None,
    init: np.ndarray | None = None,
) -> SwmResult:
    """Maximize weighted global welfare over the full horizon.

    Defaults to the scenario's Negishi weights and a 4-way multistart from
    the standard cold start.
    """
    opts = options or SolveOptions(multistart=4)
    w = scenario.weights if weights is None else np.asarray(weights, dtype=float)
    steps = scenario.horizon + 1
    problem = WindowProblem(scenario, w, scenario.x0, 0, steps)
    if init is None:
        init = default_initial_profile(scenario, steps)
    report = maximize(problem, problem.lower, problem.upper, init.ravel(), opts)
    profile = ControlProfile(report.x.reshape(scenario.n_regions, steps, 2).copy())
    traj = simulate(scenario.x0, profile, scenario)
    util = _utilities(scenario, traj.consumption, 0).sum(axis=0)
    return SwmResult(
        profile=profile,
        trajectory=traj,
        welfare=report.objective,
        regional_welfare=util,
        report=report,
    )


def pareto_weights(scenario: Scenario, p: float) -> np.ndarray:
    """Scalarization weights: p on each developed region, 1-p on the rest."""
    if not 0.0 <= p <= 1.0:
        raise ModelDomainError("p must lie in [0, 1]")
    return np.where(scenario.developed, p, 1.0 - p)


def _polish_savings(
    scenario: Scenario, controls: np.ndarray, options: SolveOptions
) -> np.ndarray:
    """Re-solve each region's saving path against its own welfare.

    Saving coordinates of a near-zero-weight region carry gradient entries
    scaled by that weight, so the joint solve stalls on them long before
    its own tolerance; this pass finishes them one region at a time under
    unit own weight, pinning every abatement coordinate through degenerate
    bounds. A saving path touches other regions only through the owner's
    unabated emissions, and where the stall actually occurs the remaining
    cluster has already pushed the stalled cluster to full abatement, so
    the refinement is exact there and a resolution-level tie-break
    elsewhere.
    """
    steps = controls.shape[1]
    polished = controls.copy()
    sub = SolveOptions(
        max_iter=options.max_iter,
        grad_tol=options.grad_tol,
        obj_rel_tol=options.obj_rel_tol,
        multistart=1,
        seed=options.seed,
        lbfgs_memory=options.lbfgs_memory,
        max_line_search=options.max_line_search,
    )
    for i in range(scenario.n_regions):
        w = np.zeros(scenario.n_regions)
        w[i] = 1.0
        problem = WindowProblem(
            scenario, w, scenario.x0, 0, steps, free_regions=[i], fixed=polished
        )
        z0 = problem.extract(polished)
        lower = problem.lower.copy()
        upper = problem.upper.copy()
        lower[1::2] = z0[1::2]
        upper[1::2] = z0[1::2]
        report = maximize(problem, lower, upper, z0, sub)
        polished[i] = report.x.reshape(steps, 2)
    return polished


def solve_pareto_point(
    scenario: Scenario,
    p: float,
    options: SolveOptions | None = None,
    init: np.ndarray | None = None,
    polish: bool = True,
) -> ParetoPoint:
    """Maximize p * W_developed + (1-p) * W_developing.

    With ``polish`` (the default) the joint solve is followed by a
    per-region refinement of the saving paths; see ``_polish_savings``.
    """
    opts = options or SolveOptions(multistart=2)
    steps = scenario.horizon + 1
    problem = WindowProblem(scenario, pareto_weights(scenario, p), scenario.x0, 0, steps)
    if init is None:
        init = default_initial_profile(scenario, steps)
    report = maximize(problem, problem.lower, problem.upper, init.ravel(), opts)
    controls = report.x.reshape(scenario.n_regions, steps, 2).copy()
    if polish:
        controls = _polish_savings(scenario, controls, opts)
    profile = ControlProfile(controls)
    traj = simulate(scenario.x0, profile, scenario)
    dev, devg = _cluster_welfares(scenario, traj, profile)
    return ParetoPoint(
        p=float(p),
        profile=profile,
        welfare_developed=dev,
        welfare_developing=devg,
        terminal_t_at=float(traj.states[-2, 0]),
        report=report,
    )


def _frontier_worker(args):
    scenario, p, options = args
    try:
        return p, solve_pareto_point(scenario, p, options), None
    except Exception as exc:  # noqa: BLE001 - per-point failures are recorded
        return p, None, f"{type(exc).__name__}: {exc}"


def pareto_frontier(
    scenario: Scenario,
    p_grid: np.ndarray | None = None,
    options: SolveOptions | None = None,
    threads: int = 1,
    audit_rel_tol: float | None = None,
) -> FrontierResult:
    """Trace the developed/developing frontier over a grid of p values.

    Sequential mode chains warm starts left to right and then re-solves
    right to left from each right neighbour, keeping the better
    scalarized objective per point; a single forward chain leaves early
    grid points systematically less converged than late ones, which shows
    up as spurious dominance. With ``threads > 1`` the points solve in
    parallel from cold starts (results may differ within solver
    tolerance). Every pair of points is audited for dominance at
    ``audit_rel_tol`` (default ``AUDIT_REL_TOL``, the measured resolution
    floor of the solve-and-polish pipeline on this problem family).
    """
    if p_grid is None:
        p_grid = np.linspace(0.0, 1.0, 21)
    p_grid = np.asarray(p_grid, dtype=float)
    opts = options or SolveOptions(multistart=2)

    points: list[ParetoPoint | None] = [None] * p_grid.size
    failures = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for idx, (p, point, err) in enumerate(
                pool.map(_frontier_worker, [(scenario, p, opts) for p in p_grid])
            ):
                if err is not None:
                    failures.append((float(p), err))
                else:
                    points[idx] = point
    else:
        init = None
        for idx, p in enumerate(p_grid):
            try:
                point = solve_pareto_point(scenario, p, opts, init=init)
            except Exception as exc:  # noqa: BLE001 - recorded, scan continues
                failures.append((float(p), f"{type(exc).__name__}: {exc}"))
                init = None
                continue
            points[idx] = point
            init = point.profile.controls
        init = None
        for idx in range(p_grid.size - 1, -1, -1):
            current = points[idx]
            if init is not None:
                try:
                    again = solve_pareto_point(scenario, p_grid[idx], opts, init=init)
                except Exception as exc:  # noqa: BLE001 - recorded, scan continues
                    if current is None:
                        failures.append(
                            (float(p_grid[idx]), f"{type(exc).__name__}: {exc}")
                        )
                else:
                    if (
                        current is None
                        or again.report.objective > current.report.objective
                    ):
                        points[idx] = again
            if points[idx] is not None:
                init = points[idx].profile.controls
        rescued = {float(p_grid[i]) for i, pt in enumerate(points) if pt is not None}
        failures = [f for f in failures if f[0] not in rescued]

    solved = [pt for pt in points if pt is not None]
    tol = audit_rel_tol if audit_rel_tol is not None else AUDIT_REL_TOL
    violations = []
    for a in range(len(solved)):
        for b in range(len(solved)):
            if a == b:
                continue
            pa, pb = solved[a], solved[b]
            gain_dev = pa.welfare_developed - pb.welfare_developed
            gain_devg = pa.welfare_developing - pb.welfare_developing
            if gain_dev > tol * abs(pb.welfare_developed) and gain_devg > tol * abs(
                pb.welfare_developing
            ):
                violations.append((a, b))
    return FrontierResult(points=solved, failures=failures, dominance_violations=violations)


def mpc_rice(
    scenario: Scenario,
    t_sim: int,
    t_rh: int,
    options: SolveOptions | None = None,
    weights: np.ndarray | None = None,
) -> MpcResult:
    """Receding-horizon welfare maximization.

    At each step t the window [t, t + t_rh] is re-solved from the current
    state, warm-started from the previous window's solution shifted by one
    (last entry repeated); only the first controls are played. The played
    window objective never falls below the shifted initializer's.
    """
    if t_sim < 0 or t_rh < 1:
        raise ModelDomainError("t_sim must be >= 0 and t_rh >= 1")
    if t_sim + t_rh + 1 > scenario.exo.length:
        raise ModelDomainError(
            "exogenous paths do not cover t_sim + t_rh; extend the scenario"
        )
    opts = options or SolveOptions()
    w = scenario.weights if weights is None else np.asarray(weights, dtype=float)
    n = scenario.n_regions
    steps_w = t_rh + 1

    played = np.empty((n, t_sim + 1, 2))
    objs = np.empty(t_sim + 1)
    inits = np.empty(t_sim + 1)
    x = scenario.x0
    prev = default_initial_profile(scenario, steps_w)
    for t in range(t_sim + 1):
        problem = WindowProblem(scenario, w, x, t, steps_w)
        init = prev.ravel()
        inits[t] = problem.value(init)
        report = maximize(problem, problem.lower, problem.upper, init, opts)
        full = report.x.reshape(n, steps_w, 2)
        objs[t] = report.objective
        played[:, t, :] = full[:, 0, :]
        x, _ = step(t, x, full[:, 0, :], scenario)
        prev = np.concatenate([full[:, 1:, :], full[:, -1:, :]], axis=1)

    profile = ControlProfile(played)
    traj = simulate(scenario.x0, profile, scenario)
    return MpcResult(
        profile=profile,
        trajectory=traj,
        window_objectives=objs,
        window_initial_objectives=inits,
    )
