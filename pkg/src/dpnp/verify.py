"""Invariant suite run by ``dpnp verify`` and by the acceptance tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import profiles
from .coupling import FixedPointConfig, Problem, Trajectory, fixed_point_step, run, uniqueness_probe
from .oracle import MAX_CELLS, monolithic_step
from .transport import CLAMP_THRESHOLD

MASS_TOL = 1e-11
ENTROPY_SLACK = 1e-10
ORACLE_TOL = 1e-9
GROWTH_LIMIT = 100.0
UNIQUENESS_FACTOR = 10.0
PERTURBATIONS = (1e-3, 1e-1)


@dataclass(frozen=True)
class InvariantResult:
    name: str
    passed: bool
    detail: str
    applicable: bool = True

    def __str__(self):
        tag = "PASS" if self.passed else "FAIL"
        if not self.applicable:
            tag = "SKIP"
        return f"{tag} {self.name}: {self.detail}"


def _zero_profile(p) -> bool:
    return isinstance(p, profiles.Constant) and p.value == 0.0


def dissipative(problem: Problem) -> bool:
    """Data under which the entropy must not grow: no boundary or background charge, no reactions."""
    bc = problem.bc
    plain = all(not callable(getattr(bc, n)) or hasattr(getattr(bc, n), "kind")
                for n in ("sigma", "fluid_flux", "background_charge"))
    return (plain and _zero_profile(bc.sigma) and _zero_profile(bc.fluid_flux)
            and _zero_profile(bc.background_charge) and bc.rho_b_offset == 0.0
            and not problem.reactions.active)


def check_nonnegativity(traj: Trajectory) -> InvariantResult:
    worst = min(r.min_concentration for r in traj.records)
    clamps = sum(r.clamp_events for r in traj.records)
    return InvariantResult("non-negativity", worst >= CLAMP_THRESHOLD,
                           f"min concentration before clamping {worst:.3e}, clamp events {clamps}")


def mass_drift(traj: Trajectory) -> float:
    m0 = np.array(traj.records[0].mass)
    worst = 0.0
    for r in traj.records[1:]:
        d = np.abs(np.array(r.mass) - m0) / np.maximum(np.abs(m0), 1e-300)
        d = np.where(m0 == 0, np.abs(np.array(r.mass)), d)
        worst = max(worst, float(d.max()))
    return worst


def check_mass(problem: Problem, traj: Trajectory) -> InvariantResult:
    if problem.reactions.active:
        return InvariantResult("mass conservation", True, "reactions present", applicable=False)
    d = mass_drift(traj)
    return InvariantResult("mass conservation", d <= MASS_TOL, f"max relative drift {d:.3e}")


def entropy_increase(traj: Trajectory) -> float:
    s = [r.entropy for r in traj.records]
    return max([b - a for a, b in zip(s, s[1:])], default=0.0)


def check_entropy_dissipation(problem: Problem, traj: Trajectory) -> InvariantResult:
    if not dissipative(problem):
        return InvariantResult("entropy dissipation", True,
                               "needs zero sigma, f, rho_b and R", applicable=False)
    inc = entropy_increase(traj)
    return InvariantResult("entropy dissipation", inc <= ENTROPY_SLACK,
                           f"largest step increase {inc:.3e}")


def check_envelopes(traj: Trajectory) -> list:
    ent = [r for r in traj.records if r.entropy > r.entropy_env]
    en = [r for r in traj.records if r.energy > r.energy_env]
    last = traj.records[-1]
    return [
        InvariantResult("entropy envelope", not ent,
                        f"{len(ent)} violations; final {last.entropy:.6g} <= {last.entropy_env:.6g}"),
        InvariantResult("energy envelope", not en,
                        f"{len(en)} violations; final {last.energy:.6g} <= {last.energy_env:.6g}"),
    ]


def growth_factor(traj: Trajectory) -> float:
    """Largest ``max_t ||c_l||_inf / ||c_l(0)||_inf``; species starting at zero use the largest initial maximum."""
    linf0 = np.array(traj.records[0].linf)
    ref = np.where(linf0 > 0, linf0, linf0.max() if linf0.max() > 0 else 1.0)
    peak = np.max([r.linf for r in traj.records], axis=0)
    return float(np.max(peak / ref))


def check_boundedness(traj: Trajectory) -> InvariantResult:
    g = growth_factor(traj)
    ok = math.isfinite(g) and g <= GROWTH_LIMIT
    return InvariantResult("boundedness", ok, f"max growth of ||c_l||_inf {g:.4g} (limit {GROWTH_LIMIT:g})")


def oracle_difference(problem: Problem, cfg: FixedPointConfig, states) -> float:
    worst = 0.0
    for s in states:
        a, _ = fixed_point_step(s, problem, cfg)
        b = monolithic_step(s, problem, cfg)
        for name in ("c", "phi", "p", "E", "q"):
            worst = max(worst, float(np.max(np.abs(getattr(a, name) - getattr(b, name)))))
    return worst


def check_oracle(problem: Problem, cfg: FixedPointConfig, traj: Trajectory,
                 max_states: int = 5) -> InvariantResult:
    if problem.grid.ncells > MAX_CELLS:
        return InvariantResult("oracle equivalence", True,
                               f"grid larger than {MAX_CELLS} cells", applicable=False)
    states = traj.states[:-1][:max_states]
    d = oracle_difference(problem, cfg, states)
    return InvariantResult("oracle equivalence", d <= ORACLE_TOL,
                           f"max-abs difference {d:.3e} over {len(states)} steps")


def check_uniqueness(problem: Problem, cfg: FixedPointConfig, traj: Trajectory, seed: int = 0,
                     trials: int = 2) -> InvariantResult:
    limit = UNIQUENESS_FACTOR * cfg.fp_tol
    picks = [traj.states[0], traj.states[len(traj.states) // 2]]
    worst = 0.0
    for k, state in enumerate(picks):
        for scale in PERTURBATIONS:
            worst = max(worst, uniqueness_probe(state, problem, cfg, scale, seed=seed + k, trials=trials))
    return InvariantResult("uniqueness", worst <= limit,
                           f"max divergence {worst:.3e} (limit {limit:.1e})")


def verify_problem(problem: Problem, c0, cfg: FixedPointConfig, *, seed: int = 0,
                   traj: Trajectory | None = None) -> list:
    """Run (unless ``traj`` is given) and check every invariant."""
    if traj is None:
        traj = run(problem, c0, cfg, keep_states=True)
    results = [check_nonnegativity(traj), check_mass(problem, traj),
               check_entropy_dissipation(problem, traj)]
    results += check_envelopes(traj)
    results += [check_boundedness(traj), check_oracle(problem, cfg, traj),
                check_uniqueness(problem, cfg, traj, seed=seed)]
    return results
