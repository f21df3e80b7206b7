"""Darcy flow driven by the Coulomb body force.

Velocity ``q = K (-grad(p) / mu + force)`` with ``force = f_el / (mu eps)``,
``div q = 0`` and ``q.nu = f`` on the boundary.  The force is a face
quantity and enters the flux law directly, the discrete counterpart of
pairing it with the velocity test function.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid2D, cached_tpfa_matrix, face_coefficient
from .linalg import conjugate_gradient
from .model import BoundaryData, ModelParams
from .poisson import neumann_right_hand_side


@dataclass(frozen=True)
class DarcySolution:
    q: np.ndarray
    p: np.ndarray
    residual_norm: float
    cg_iterations: int
    imbalance: float = 0.0
    repaired: bool = False


def electric_body_force(grid: Grid2D, rho_f, E, params: ModelParams) -> np.ndarray:
    """Face-normal force density ``mean(rho_f) * E / (mu * eps)``.

    Interior faces average the two adjacent cells arithmetically; boundary
    faces use the single adjacent cell.
    """
    rho_f = np.asarray(rho_f, dtype=float)
    fc = grid.face_cells
    rho_face = np.empty(grid.nfaces)
    f = grid.interior_faces
    rho_face[f] = 0.5 * (rho_f[fc[f, 0]] + rho_f[fc[f, 1]])
    rho_face[grid.boundary_faces] = rho_f[grid.boundary_cells]
    return rho_face * np.asarray(E, dtype=float) / (params.viscosity * params.permittivity)


def solve_darcy(grid: Grid2D, force, bc: BoundaryData, params: ModelParams, t: float = 0.0,
                tol: float = 1e-10, *, compat_tol=None, allow_repair=True, preconditioner=None,
                x0=None) -> DarcySolution:
    """Divergence-free velocity (faces) and zero-mean pressure (cells)."""
    f_bnd = bc.flux_at(grid, t)
    force = np.asarray(force, dtype=float)
    kf = face_coefficient(grid, params.permeability)
    inner = grid.interior_faces

    # flux carried by the force alone; boundary faces carry the prescribed f
    w = np.zeros(grid.nfaces)
    w[inner] = kf[inner] * force[inner]
    src = -(grid.divergence_matrix @ w)
    rhs, imbalance, repaired = neumann_right_hand_side(
        grid, src, f_bnd, compat_tol, allow_repair, what="boundary fluid flux")
    A = cached_tpfa_matrix(grid, tuple(params.permeability / params.viscosity))
    res = conjugate_gradient(A, rhs, x0=x0, tol=tol, preconditioner=preconditioner)

    q = np.empty(grid.nfaces)
    dp = grid.difference_matrix @ res.x
    q[inner] = -kf[inner] / params.viscosity * dp[inner] + w[inner]
    q[grid.boundary_faces] = f_bnd * grid.boundary_sign
    return DarcySolution(q, res.x, res.residual_norm, res.iterations, imbalance, repaired)
