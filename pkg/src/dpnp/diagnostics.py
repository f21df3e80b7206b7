"""Discrete monitors for the a-priori estimates of the model.

Entropy is ``sum_l sum_cells Lambda(c_l) * area`` with
``Lambda(x) = x (ln x - 1) + e``.  The envelopes are the closed-form
Gronwall bounds for the entropy and for ``sum_l ||c_l||^2``; they are
reported next to the measured values and never fed back into the solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid2D, face_l2_norm, gradient_l2_norm, l2_norm

EULER = math.e
# exp() overflows above this; larger log-envelopes are reported as inf
_LOG_MAX = 700.0


def lyapunov(x):
    """``x (ln x - 1) + e``, continuously extended by ``Lambda(0) = e``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("Lyapunov function is only defined for non-negative arguments")
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(x > 0, x * (np.log(np.where(x > 0, x, 1.0)) - 1.0), 0.0) + EULER
    return val if val.ndim else float(val)


def entropy_total(c, grid: Grid2D) -> float:
    """``sum_l sum_i Lambda(c_l,i) * cell_area``."""
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("entropy needs non-negative concentrations")
    return float(np.sum(lyapunov(c)) * grid.cell_area)


def drift_sign_term(valencies, concentrations) -> float:
    """``(sum z_l c_l) * (sum sign(z_l) (|z_l| c_l)^2)``, the pointwise drift integrand.

    Non-negative for two oppositely charged unit species, but of either sign
    once three or more species are present.
    """
    z = np.asarray(valencies, dtype=float)
    c = np.asarray(concentrations, dtype=float)
    if z.shape != c.shape:
        raise ValueError(f"{z.size} valencies for {c.size} concentrations")
    if np.any(c < 0):
        raise ValueError("concentrations must be non-negative")
    return float(np.sum(z * c) * np.sum(np.sign(z) * (np.abs(z) * c) ** 2))


@dataclass(frozen=True)
class GronwallConstants:
    """Constants of the entropy and energy bounds.

    ``b`` is the entropy growth rate, ``A0``/``B0``/``kappa`` the energy
    constants, ``S0`` the initial entropy and ``E0`` the initial
    ``sum ||c_l||^2``.
    """

    alpha_D: float
    b: float
    S0: float
    E0: float
    kappa: float
    A0: float
    B0: float
    charge_scale: float

    def entropy_envelope(self, t: float) -> float:
        bt = self.b * t
        if bt > _LOG_MAX:
            return math.inf
        return (1.0 + bt * math.exp(bt)) * self.S0

    def charge_bound(self, t: float) -> float:
        """Bound on the space-time L2 norm squared of the free charge (``C_L``)."""
        Ct = self.entropy_envelope(t)
        c1 = (1.0 + self.b * Ct) * self.S0 / self.charge_scale
        c2 = 2.0 / self.alpha_D * (1.0 + self.b * Ct) * self.S0
        return 2.0 * max(c1, c2)

    def log_energy_envelope(self, t: float) -> float:
        CL = self.charge_bound(t)
        if not math.isfinite(CL):
            return math.inf
        exponent = self.B0 * t + self.kappa / self.A0 * max(CL, CL * CL)
        return exponent + math.log(self.E0) if self.E0 > 0 else -math.inf

    def energy_envelope(self, t: float) -> float:
        lg = self.log_energy_envelope(t)
        if lg > _LOG_MAX:
            return math.inf
        return math.exp(lg)


def gronwall_constants(params, bc, reactions, initial, grid: Grid2D, *,
                       c_bound: float | None = None) -> GronwallConstants:
    """Evaluate the bound constants for the given data.

    ``alpha_D`` is the smallest diagonal diffusivity, the reaction
    Lipschitz constants come from ``reactions`` (mass action over
    ``[0, c_bound]``), and the boundary/background bounds from ``bc``.
    """
    c0 = np.atleast_2d(np.asarray(initial, dtype=float))
    L = params.species_count
    theta = params.porosity
    alpha_D = float(np.min(params.diffusivities))
    zmax = float(max(abs(z) for z in params.valencies))
    s = params.elementary_charge / (params.permittivity * params.thermal_energy)
    f_inf = bc.bound("fluid_flux")
    sig_inf = bc.bound("sigma")
    rhob_inf = bc.bound("background_charge")
    if c_bound is None:
        c_bound = max(1.0, float(c0.max()) if c0.size else 1.0)
    C_R = float(np.max(reactions.lipschitz_constants(L, c_bound))) if L else 0.0

    # boundary and background terms enter through theta * d/dt, reactions through theta * R
    b_bnd = 8.0 / alpha_D * f_inf ** 2 + 8.0 * s ** 2 * zmax ** 2 / alpha_D * sig_inf ** 2
    b_bg = s * zmax * rhob_inf
    b = (b_bnd + b_bg) / theta + C_R

    kappa = 12.0 * s ** 2 * zmax ** 2 / alpha_D
    A0 = min(theta / 2.0, alpha_D / 2.0)
    B0 = (kappa * (sig_inf ** 2 + rhob_inf) + 4.0 / alpha_D * f_inf ** 2 + 3.0 * theta * C_R) / A0
    # C_{L,1} carries a factor eps k_B T / e; the free charge is prefactor*theta*sum(z c)
    charge_scale = s / max((params.charge_prefactor * theta) ** 2, 1e-300)
    S0 = entropy_total(c0, grid)
    E0 = float(sum(l2_norm(grid, cl) ** 2 for cl in c0))
    return GronwallConstants(alpha_D, b, S0, E0, kappa, A0, B0, charge_scale)


def gronwall_envelopes(params, bc, reactions, initial, grid: Grid2D, t: float) -> tuple[float, float]:
    """(entropy envelope, energy envelope) at time ``t``."""
    k = gronwall_constants(params, bc, reactions, initial, grid)
    return k.entropy_envelope(t), k.energy_envelope(t)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    outer_iters: int
    clamp_events: int
    entropy: float
    entropy_env: float
    charge_l2: float
    energy: float
    energy_env: float
    mass: tuple
    l2: tuple
    linf: tuple
    grad_l2: tuple
    E_l2: float
    phi_l2: float
    q_l2: float
    p_l2: float
    min_concentration: float
    cg_iterations: int
    repaired: bool = False


class EnvelopeMonitor:
    """Caches the bound constants of one run (they depend on the initial data only)."""

    def __init__(self, problem, initial):
        self.constants = gronwall_constants(problem.params, problem.bc, problem.reactions,
                                            initial, problem.grid)

    def envelopes(self, t):
        return self.constants.entropy_envelope(t), self.constants.energy_envelope(t)


def make_record(problem, state, info, monitor: EnvelopeMonitor) -> DiagnosticsRecord:
    grid = problem.grid
    c = state.c
    ent_env, en_env = monitor.envelopes(state.t)
    l2 = tuple(l2_norm(grid, cl) for cl in c)
    return DiagnosticsRecord(
        t=state.t,
        outer_iters=info.outer_iters,
        clamp_events=info.clamp_events,
        entropy=entropy_total(c, grid),
        entropy_env=ent_env,
        charge_l2=l2_norm(grid, state.rho_f),
        energy=float(sum(x * x for x in l2)),
        energy_env=en_env,
        mass=tuple(float(problem.params.porosity * cl.sum() * grid.cell_area) for cl in c),
        l2=l2,
        linf=tuple(float(cl.max()) for cl in c),
        grad_l2=tuple(gradient_l2_norm(grid, cl) for cl in c),
        E_l2=face_l2_norm(grid, state.E),
        phi_l2=l2_norm(grid, state.phi),
        q_l2=face_l2_norm(grid, state.q),
        p_l2=l2_norm(grid, state.p),
        min_concentration=float(info.min_concentration),
        cg_iterations=info.cg_iterations,
        repaired=info.repaired,
    )
