"""Time stepping by the fixed-point splitting Gauss -> Darcy -> transport.

Each outer iterate takes the current concentration guess, solves for the
electric field, then the flow driven by the Coulomb force, then one
implicit transport step from the start-of-step concentrations.  The loop
stops when the concentrations stop changing (relative L2 over all species).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .darcy import DarcySolution, electric_body_force, solve_darcy
from .errors import DPNPError, NonConvergence, OuterNonConvergence
from .grid import Grid2D
from .model import BoundaryData, ModelParams, ReactionSpec, charge_density
from .poisson import PoissonSolution, solve_gauss
from .transport import step_species

logger = logging.getLogger(__name__)

DENOM_FLOOR = 1e-14


@dataclass(frozen=True)
class SolverSettings:
    cg_tol: float = 1e-10
    compat_tol: float | None = None
    preconditioner: str | None = None
    allow_repair: bool = True


@dataclass(frozen=True)
class Problem:
    """Everything that stays fixed during a run."""

    grid: Grid2D
    params: ModelParams
    reactions: ReactionSpec = field(default_factory=ReactionSpec)
    bc: BoundaryData = field(default_factory=BoundaryData)
    solver: SolverSettings = field(default_factory=SolverSettings)
    # replaces electric_body_force when set: (grid, rho_f, E, params) -> face force
    force_hook: Callable | None = None

    @property
    def coupled(self) -> bool:
        """Whether the sub-problems feed back into the concentrations."""
        return (any(z != 0 for z in self.params.valencies) or self.reactions.active
                or self.force_hook is not None)


@dataclass(frozen=True)
class FixedPointConfig:
    dt: float
    t_end: float
    max_outer_iters: int = 50
    fp_tol: float = 1e-8
    omega: float = 1.0
    max_retries: int = 3

    def __post_init__(self):
        if not 0 < self.omega <= 1:
            raise ValueError(f"relaxation must lie in (0, 1], got {self.omega}")
        if not self.fp_tol > 0:
            raise ValueError(f"fp_tol must be positive, got {self.fp_tol}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < self.dt:
            raise ValueError(f"t_end={self.t_end} is shorter than one step dt={self.dt}")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_end / self.dt - 1e-9))


@dataclass(frozen=True)
class SystemState:
    t: float
    c: np.ndarray
    E: np.ndarray
    q: np.ndarray
    phi: np.ndarray
    p: np.ndarray
    rho_f: np.ndarray


@dataclass
class StepInfo:
    outer_iters: int = 0
    residuals: list = field(default_factory=list)
    clamp_events: int = 0
    min_concentration: float = math.inf
    cg_iterations: int = 0
    repaired: bool = False
    substeps: int = 1


def _solve_fields(problem: Problem, c, t, x0_phi=None, x0_p=None, trace=None):
    s = problem.solver
    rho_f = charge_density(c, problem.params)
    if trace is not None:
        trace.append("gauss")
    gauss: PoissonSolution = solve_gauss(
        problem.grid, rho_f, problem.bc, problem.params, t, s.cg_tol, compat_tol=s.compat_tol,
        allow_repair=s.allow_repair, preconditioner=s.preconditioner, x0=x0_phi)
    hook = problem.force_hook or electric_body_force
    force = hook(problem.grid, rho_f, gauss.E, problem.params)
    if trace is not None:
        trace.append("darcy")
    darcy: DarcySolution = solve_darcy(
        problem.grid, force, problem.bc, problem.params, t, s.cg_tol, compat_tol=s.compat_tol,
        allow_repair=s.allow_repair, preconditioner=s.preconditioner, x0=x0_p)
    return rho_f, gauss, darcy


def initial_state(problem: Problem, c0, t: float = 0.0) -> SystemState:
    """State at ``t`` with fields solved from the given concentrations."""
    c0 = np.atleast_2d(np.array(c0, dtype=float))
    expected = (problem.params.species_count, problem.grid.ncells)
    if c0.shape != expected:
        raise ValueError(f"initial data has shape {c0.shape}, expected {expected}")
    if np.any(c0 < 0) or not np.all(np.isfinite(c0)):
        raise ValueError("initial concentrations must be finite and non-negative")
    rho_f, gauss, darcy = _solve_fields(problem, c0, t)
    return SystemState(t, c0, gauss.E, darcy.q, gauss.phi, darcy.p, rho_f)


def relative_change(new, old) -> float:
    return float(np.linalg.norm(new - old) / max(np.linalg.norm(new), DENOM_FLOOR))


def fixed_point_step(state: SystemState, problem: Problem, cfg: FixedPointConfig,
                     dt: float | None = None, *, initial_iterate=None,
                     trace: list | None = None) -> tuple[SystemState, StepInfo]:
    """Advance ``state`` by one step and return the converged state with step info.

    ``initial_iterate`` replaces the start-of-step concentrations as the first
    outer guess (the transport step still starts from ``state.c``).  When
    ``trace`` is a list, the sub-solver call order is appended to it.
    """
    dt = cfg.dt if dt is None else dt
    t_new = state.t + dt
    c_start = state.c
    c_k = c_start if initial_iterate is None else np.atleast_2d(np.asarray(initial_iterate, float))
    info = StepInfo()
    phi, p = state.phi, state.p
    if cfg.omega < 1:
        logger.info("outer iteration relaxed with omega=%g", cfg.omega)
    for k in range(1, cfg.max_outer_iters + 1):
        try:
            rho_f, gauss, darcy = _solve_fields(problem, c_k, t_new, phi, p, trace)
            if trace is not None:
                trace.append("transport")
            tr = step_species(problem.grid, c_start, gauss.E, darcy.q, dt, problem.reactions,
                              problem.params, c_frozen=c_k, t=state.t)
        except DPNPError as exc:
            exc.args = (f"outer iteration {k} at t={t_new:g}: {exc.args[0]}",) + exc.args[1:]
            raise
        phi, p = gauss.phi, darcy.p
        info.cg_iterations += gauss.cg_iterations + darcy.cg_iterations
        info.repaired |= gauss.repaired or darcy.repaired
        info.clamp_events += tr.clamp_events
        info.min_concentration = min(info.min_concentration, tr.min_before_clamp)
        c_next = cfg.omega * tr.c + (1 - cfg.omega) * c_k
        res = relative_change(c_next, c_k)
        info.residuals.append(res)
        info.outer_iters = k
        c_k = c_next
        # without feedback the first pass is already the fixed point
        if res <= cfg.fp_tol or not problem.coupled:
            break
    else:
        raise OuterNonConvergence(
            f"fixed-point loop at t={t_new:g} did not converge in {cfg.max_outer_iters} "
            f"iterations (last relative change {info.residuals[-1]:.3e})",
            cfg.max_outer_iters, info.residuals)
    r = info.residuals
    if any(b > a for a, b in zip(r[1:], r[2:])):
        logger.warning("outer residual not monotone at t=%g: %s", t_new,
                       ", ".join(f"{x:.2e}" for x in r))
    if problem.coupled:
        # the loop's fields belong to the previous iterate; make them consistent with c_k
        rho_f, gauss, darcy = _solve_fields(problem, c_k, t_new, phi, p)
        info.cg_iterations += gauss.cg_iterations + darcy.cg_iterations
    new = SystemState(t_new, c_k, gauss.E, darcy.q, gauss.phi, darcy.p, rho_f)
    return new, info


def advance(state: SystemState, problem: Problem, cfg: FixedPointConfig, dt: float,
            depth: int = 0) -> tuple[SystemState, StepInfo]:
    """One step of size ``dt``; on outer non-convergence retry as two half steps."""
    try:
        return fixed_point_step(state, problem, cfg, dt)
    except OuterNonConvergence:
        if depth >= cfg.max_retries:
            raise
        logger.warning("outer loop failed at t=%g with dt=%g; halving", state.t, dt)
        mid, a = advance(state, problem, cfg, dt / 2, depth + 1)
        end, b = advance(mid, problem, cfg, dt / 2, depth + 1)
        merged = StepInfo(
            outer_iters=a.outer_iters + b.outer_iters, residuals=a.residuals + b.residuals,
            clamp_events=a.clamp_events + b.clamp_events,
            min_concentration=min(a.min_concentration, b.min_concentration),
            cg_iterations=a.cg_iterations + b.cg_iterations, repaired=a.repaired or b.repaired,
            substeps=a.substeps + b.substeps)
        return end, merged


@dataclass
class Trajectory:
    states: list
    records: list


def run(problem: Problem, initial, cfg: FixedPointConfig, *, callback=None,
        keep_states: bool = True) -> Trajectory:
    """Integrate from ``t = 0`` to ``cfg.t_end``.

    Returns every state (``n_steps + 1`` including the initial one) and one
    diagnostics record per state.  ``callback(state, record)`` is called as
    records are produced; with ``keep_states=False`` only the first and last
    states are retained.
    """
    from .diagnostics import EnvelopeMonitor, make_record

    state = initial_state(problem, initial)
    monitor = EnvelopeMonitor(problem, state.c)
    rec = make_record(problem, state, StepInfo(outer_iters=0, min_concentration=float(state.c.min())),
                      monitor)
    states, records = [state], [rec]
    if callback is not None:
        callback(state, rec)
    for n in range(cfg.n_steps):
        dt = min(cfg.dt, cfg.t_end - state.t) if n == cfg.n_steps - 1 else cfg.dt
        state, info = advance(state, problem, cfg, dt)
        rec = make_record(problem, state, info, monitor)
        if keep_states or n == cfg.n_steps - 1:
            states.append(state)
        records.append(rec)
        if callback is not None:
            callback(state, rec)
    return Trajectory(states, records)


def uniqueness_probe(state: SystemState, problem: Problem, cfg: FixedPointConfig,
                     perturbation_scale: float, *, seed: int = 0, trials: int = 1) -> float:
    """Largest distance between converged steps started from perturbed outer guesses.

    The reference step starts the outer loop from ``state.c``; each trial
    starts it from ``state.c`` plus uniform noise in ``[-scale, scale]``
    (zero mean per species, clipped at zero, then rescaled to the original
    species totals so the guess carries the same net charge and stays
    admissible for the pure-Neumann Gauss problem).  Distances are L2 norms
    of the differences of c, Phi, p, E and q, each divided by
    ``max(1, ||reference field||)``.
    """
    ref, _ = fixed_point_step(state, problem, cfg)
    if perturbation_scale == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        noise = rng.uniform(-perturbation_scale, perturbation_scale, size=state.c.shape)
        noise -= noise.mean(axis=1, keepdims=True)
        start = np.maximum(state.c + noise, 0.0)
        total, moved = state.c.sum(axis=1), start.sum(axis=1)
        start *= np.where(moved > 0, total / np.where(moved > 0, moved, 1.0), 0.0)[:, None]
        other, _ = fixed_point_step(state, problem, cfg, initial_iterate=start)
        worst = max(worst, state_distance(ref, other))
    return worst


def state_distance(a: SystemState, b: SystemState) -> float:
    d = 0.0
    for name in ("c", "phi", "p", "E", "q"):
        x, y = getattr(a, name), getattr(b, name)
        d = max(d, float(np.linalg.norm(x - y) / max(1.0, np.linalg.norm(x))))
    return d
