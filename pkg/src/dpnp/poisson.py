"""Electrostatics: given the free charge, solve the mixed Gauss law for E and Phi.

``E = -eps grad(Phi)`` is eliminated through two-point fluxes, leaving the
pure-Neumann problem ``-div(eps grad Phi) = rho_f + rho_b`` with
``E.nu = sigma`` imposed strongly on every boundary face.  The potential
is fixed to zero mean.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CompatibilityViolation
from .grid import Grid2D, cached_tpfa_matrix, tpfa_gradient_flux
from .linalg import conjugate_gradient
from .model import BoundaryData, ModelParams


@dataclass(frozen=True)
class PoissonSolution:
    E: np.ndarray
    phi: np.ndarray
    residual_norm: float
    cg_iterations: int
    imbalance: float = 0.0
    repaired: bool = False


def neumann_right_hand_side(grid: Grid2D, source, boundary_flux, compat_tol=None,
                            allow_repair=True, what="data"):
    """Cell right-hand side ``source * area - outgoing boundary flux * |face|``.

    Returns ``(rhs, imbalance, repaired)``.  The imbalance is the net
    amount by which sources exceed boundary outflow; it must vanish for a
    pure-Neumann problem.  Within ``compat_tol`` it is removed silently,
    within ``10 * compat_tol`` it is spread uniformly over the cells and
    flagged (when ``allow_repair``), beyond that the data is rejected.
    """
    if compat_tol is None:
        compat_tol = 1e-10 * grid.area
    rhs = np.asarray(source, dtype=float) * grid.cell_area
    out = np.asarray(boundary_flux, dtype=float) * grid.face_length[grid.boundary_faces]
    np.subtract.at(rhs, grid.boundary_cells, out)
    imbalance = float(rhs.sum())
    repaired = False
    if abs(imbalance) > compat_tol:
        if allow_repair and abs(imbalance) <= 10 * compat_tol:
            repaired = True
        else:
            raise CompatibilityViolation(
                f"{what} incompatible with the pure-Neumann problem: net source minus boundary "
                f"outflow is {imbalance:.3e} (tolerance {compat_tol:.1e})", imbalance)
    rhs -= imbalance / grid.ncells
    return rhs, imbalance, repaired


def solve_gauss(grid: Grid2D, rho_f, bc: BoundaryData, params: ModelParams, t: float = 0.0,
                tol: float = 1e-10, *, compat_tol=None, allow_repair=True, preconditioner=None,
                x0=None) -> PoissonSolution:
    """Electric field (faces) and zero-mean potential (cells) for a given free charge."""
    sigma = bc.sigma_at(grid, t)
    source = np.asarray(rho_f, dtype=float) + bc.rho_b_at(grid, t)
    if bc.neutralizing:
        # a uniform background takes up the net charge; nothing to check
        compat_tol = np.inf
    rhs, imbalance, repaired = neumann_right_hand_side(
        grid, source, sigma, compat_tol, allow_repair, what="charge and surface charge")
    A = cached_tpfa_matrix(grid, float(params.permittivity))
    res = conjugate_gradient(A, rhs, x0=x0, tol=tol, preconditioner=preconditioner)
    E = tpfa_gradient_flux(grid, res.x, params.permittivity, boundary_flux=sigma)
    return PoissonSolution(E, res.x, res.residual_norm, res.iterations, imbalance, repaired)
