"""Brute-force references for the modular solver.

:func:`monolithic_step` assembles every cell unknown of one time step
(potential, pressure and all concentrations, plus one multiplier per
pure-Neumann gauge) into a single dense matrix and iterates Picard-style
on all of them at once, solving each linearisation by dense elimination.
It reuses the operator assembly of the modular path but none of its
solvers, so agreement checks the splitting and the iterative solvers.

:func:`manufactured_errors` measures discretisation errors against
closed-form solutions on a sequence of grids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coupling import FixedPointConfig, Problem, SystemState
from .darcy import electric_body_force, solve_darcy
from .errors import NonConvergence
from .grid import Grid2D, face_coefficient, l2_norm, tpfa_gradient_flux, tpfa_matrix
from .model import BoundaryData, ModelParams, ReactionSpec, charge_density, split_reactions
from .poisson import solve_gauss
from .transport import _species_entries, species_velocity, step_species, transport_rhs

MAX_CELLS = 16


def _boundary_outflow(grid: Grid2D, flux) -> np.ndarray:
    """Per-cell total outward boundary flux times face length."""
    out = np.zeros(grid.ncells)
    np.add.at(out, grid.boundary_cells, np.asarray(flux, float) * grid.face_length[grid.boundary_faces])
    return out


def _darcy_velocity(grid, p, force, f_bnd, params):
    kf = face_coefficient(grid, params.permeability)
    q = np.empty(grid.nfaces)
    inner = grid.interior_faces
    dp = grid.difference_matrix @ p
    q[inner] = kf[inner] * (-dp[inner] / params.viscosity + force[inner])
    q[grid.boundary_faces] = f_bnd * grid.boundary_sign
    return q


def monolithic_step(state: SystemState, problem: Problem, cfg: FixedPointConfig,
                    dt: float | None = None, *, tol: float = 1e-12,
                    max_iters: int = 500) -> SystemState:
    """One backward-Euler step solved on all unknowns simultaneously.

    Unknown vector ``[phi, p, c_1, ..., c_L, lam_phi, lam_p]``.  The Gauss
    rows are linear in ``c`` and enter implicitly; the Coulomb force, the
    drift velocities and the reaction split are evaluated at the previous
    Picard iterate.  Stops when the max-abs change of every unknown is
    below ``tol * max(1, max|x|)``.
    """
    grid, params, bc = problem.grid, problem.params, problem.bc
    n = grid.ncells
    if n > MAX_CELLS:
        raise ValueError(f"monolithic oracle is limited to {MAX_CELLS} cells, grid has {n}")
    dt = cfg.dt if dt is None else dt
    t_new = state.t + dt
    L = params.species_count
    theta = params.porosity
    N = (2 + L) * n + 2
    iphi, ip = slice(0, n), slice(n, 2 * n)
    ic = [slice((2 + l) * n, (3 + l) * n) for l in range(L)]
    lam_phi, lam_p = N - 2, N - 1

    sigma = bc.sigma_at(grid, t_new)
    f_bnd = bc.flux_at(grid, t_new)
    A_eps = tpfa_matrix(grid, params.permittivity).toarray()
    A_k = tpfa_matrix(grid, params.permeability / params.viscosity).toarray()
    kf = face_coefficient(grid, params.permeability)
    rhs_gauss = bc.rho_b_at(grid, t_new) * grid.cell_area - _boundary_outflow(grid, sigma)
    flux_out = _boundary_outflow(grid, f_bnd)
    hook = problem.force_hook or electric_body_force
    zc = params.charge_prefactor * theta * np.asarray(params.valencies, float) * grid.cell_area

    c_old = state.c
    phi, p, c = state.phi.copy(), state.p.copy(), state.c.copy()
    for it in range(1, max_iters + 1):
        rho_f = charge_density(c, params)
        E = tpfa_gradient_flux(grid, phi, params.permittivity, boundary_flux=sigma)
        force = hook(grid, rho_f, E, params)
        q = _darcy_velocity(grid, p, force, f_bnd, params)
        if problem.reactions.active:
            prod, loss = split_reactions(problem.reactions, c)
        else:
            prod = loss = None

        M = np.zeros((N, N))
        b = np.zeros(N)
        # Gauss: A_eps phi - area * prefactor * theta * sum z c + lam = rho_b * area - sigma out
        M[iphi, iphi] = A_eps
        for l in range(L):
            M[iphi, ic[l]] = -zc[l] * np.eye(n)
        M[iphi, lam_phi] = 1.0
        b[iphi] = rhs_gauss
        M[lam_phi, iphi] = 1.0
        # Darcy with the lagged force
        w = np.zeros(grid.nfaces)
        inner = grid.interior_faces
        w[inner] = kf[inner] * force[inner]
        M[ip, ip] = A_k
        M[ip, lam_p] = 1.0
        b[ip] = -(grid.divergence_matrix @ w) * grid.cell_area - flux_out
        M[lam_p, ip] = 1.0
        # transport with lagged velocity and reactions
        for l in range(L):
            v = species_velocity(E, q, params.valencies[l], params)
            rows, cols, data = _species_entries(grid, v, params.diffusivities[l], theta, dt,
                                                None if loss is None else loss[l])
            block = np.zeros((n, n))
            np.add.at(block, (rows, cols), data)
            M[ic[l], ic[l]] = block
            b[ic[l]] = transport_rhs(grid, c_old[l], theta, dt, None if prod is None else prod[l])

        x = np.linalg.solve(M, b)
        phi_new, p_new = x[iphi], x[ip]
        c_new = np.array([x[s] for s in ic])
        change = max(np.abs(phi_new - phi).max(), np.abs(p_new - p).max(), np.abs(c_new - c).max())
        scale = max(1.0, np.abs(x[: N - 2]).max())
        phi, p, c = phi_new, p_new, c_new
        if change <= tol * scale:
            break
    else:
        raise NonConvergence(f"monolithic Picard iteration did not converge in {max_iters} "
                             f"iterations (last change {change:.3e})", max_iters)

    c = np.where((c < 0) & (c >= -1e-14), 0.0, c)
    rho_f = charge_density(c, params)
    E = tpfa_gradient_flux(grid, phi, params.permittivity, boundary_flux=sigma)
    q = _darcy_velocity(grid, p, hook(grid, rho_f, E, params), f_bnd, params)
    return SystemState(t_new, c, E, q, phi, p, rho_f)


# ---------------------------------------------------------------- manufactured solutions

CASES = ("poisson_cos", "darcy_gradient_force", "transport_translate")
THEORETICAL_ORDER = {"poisson_cos": 2.0, "darcy_gradient_force": 2.0, "transport_translate": 1.0}


@dataclass(frozen=True)
class ConvergenceTable:
    case: str
    levels: tuple
    errors: tuple
    ratios: tuple
    orders: tuple

    def __str__(self):
        lines = [f"{self.case}: theoretical order {THEORETICAL_ORDER[self.case]:g}",
                 f"{'n':>6} {'L2 error':>12} {'ratio':>8} {'order':>7}"]
        for i, (n, e) in enumerate(zip(self.levels, self.errors)):
            if i == 0:
                lines.append(f"{n:>6} {e:>12.4e} {'':>8} {'':>7}")
            else:
                lines.append(f"{n:>6} {e:>12.4e} {self.ratios[i - 1]:>8.3f} {self.orders[i - 1]:>7.3f}")
        return "\n".join(lines)


def _poisson_cos_error(n: int) -> float:
    grid = Grid2D(n, n)
    x, y = grid.cell_centers
    exact = np.cos(math.pi * x) * np.cos(math.pi * y)
    params = ModelParams(valencies=(0,), diffusivities=[1.0])
    rho = 2 * math.pi ** 2 * exact
    sol = solve_gauss(grid, rho, BoundaryData(), params, tol=1e-13)
    return l2_norm(grid, sol.phi - (exact - exact.mean()))


def _psi(x, y):
    return np.sin(math.pi * x) * np.exp(y) + 0.5 * np.cos(2 * math.pi * y)


def _psi_grad(x, y):
    return (math.pi * np.cos(math.pi * x) * np.exp(y),
            np.sin(math.pi * x) * np.exp(y) - math.pi * np.sin(2 * math.pi * y))


def _darcy_gradient_error(n: int) -> float:
    grid = Grid2D(n, n)
    mu = 2.0
    params = ModelParams(valencies=(0,), diffusivities=[1.0], viscosity=mu,
                         permeability=[1.0, 0.5])
    xf, yf = grid.face_centers
    gx, gy = _psi_grad(xf, yf)
    force = np.where(grid.face_axis == 0, gx, gy)
    sol = solve_darcy(grid, force, BoundaryData(), params, tol=1e-13)
    # q = K(-grad p / mu + grad psi) vanishes for p = mu * psi
    exact = mu * _psi(*grid.cell_centers)
    return l2_norm(grid, sol.p - (exact - exact.mean()))


def _bump(x, a=0.0, b=0.8):
    s = np.clip((x - a) / (b - a), 0.0, 1.0)
    return np.sin(math.pi * s) ** 2


def _transport_translate_error(n: int, t_end: float = 0.1) -> float:
    # wide bump, short time and dt = h/10 keep the coarse levels asymptotic
    grid = Grid2D(n, n)
    params = ModelParams(valencies=(0,), diffusivities=[1e-12])
    x, _ = grid.cell_centers
    c = _bump(x)[None, :]
    q = np.where(grid.face_axis == 0, 1.0, 0.0)
    q[grid.boundary_faces] = 0.0
    E = np.zeros(grid.nfaces)
    steps = int(round(10 * n * t_end))
    dt = t_end / steps
    for _ in range(steps):
        c = step_species(grid, c, E, q, dt, ReactionSpec(), params).c
    return l2_norm(grid, c[0] - _bump(x - t_end))


_ERROR = {"poisson_cos": _poisson_cos_error,
          "darcy_gradient_force": _darcy_gradient_error,
          "transport_translate": _transport_translate_error}


def manufactured_errors(case: str, levels=(8, 16, 32)) -> ConvergenceTable:
    """L2 errors against the closed-form solution of ``case`` on ``n x n`` grids.

    ``ratios[i] = errors[i] / errors[i + 1]`` and ``orders`` are their
    base-2 logarithms scaled by the refinement factor between levels.
    """
    if case not in _ERROR:
        raise ValueError(f"unknown case {case!r}; choose from {', '.join(CASES)}")
    levels = tuple(int(n) for n in levels)
    errors = tuple(_ERROR[case](n) for n in levels)
    ratios = tuple(a / b for a, b in zip(errors, errors[1:]))
    orders = tuple(math.log(r) / math.log(m / k) for r, k, m in zip(ratios, levels, levels[1:]))
    return ConvergenceTable(case, levels, errors, ratios, orders)
