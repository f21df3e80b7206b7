"""One backward-Euler step of the Nernst-Planck equations.

Per species the cell equation is

    theta*A*(c - c_old)/dt + sum_faces (v c_up - D dc/dn) |face| = theta*A*R_l

with implicit first-order upwinding for the drift ``v = q + alpha_l E`` and
implicit two-point diffusion.  Boundary faces carry no total flux at all,
which is exactly the no-flux condition.  Reactions are frozen at an outer
iterate and split into production (right-hand side) and loss (diagonal),
so every species matrix is an M-matrix and non-negative data stays
non-negative.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.sparse.linalg import spsolve

from .errors import NegativeConcentration, NonConvergence
from .grid import Grid2D
from .model import ModelParams, ReactionSpec, split_reactions

CLAMP_THRESHOLD = -1e-14


def max_threads() -> int:
    """Thread cap for species-parallel solves, from ``DPNP_MAX_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("DPNP_MAX_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class TransportResult:
    c: np.ndarray
    clamp_events: int
    min_before_clamp: float


def species_velocity(E, q, valency: int, params: ModelParams) -> np.ndarray:
    """Drift velocity ``q + e z / (eps k_B T) * E`` on every face."""
    alpha = params.elementary_charge * valency / (params.permittivity * params.thermal_energy)
    return np.asarray(q, dtype=float) + alpha * np.asarray(E, dtype=float)


def _species_entries(grid: Grid2D, v, diffusivity, porosity: float, dt: float, loss=None):
    """COO triplets (with duplicates) of the species matrix."""
    f = grid.interior_faces
    fc = grid.face_cells[f]
    lo, hi = fc[:, 0], fc[:, 1]
    length = grid.face_length[f]
    D = np.asarray(diffusivity, dtype=float)[grid.face_axis[f]]
    g = D / grid.face_spacing[f] * length
    vf = np.asarray(v, dtype=float)[f]
    a = np.maximum(vf, 0.0) * length
    b = np.minimum(vf, 0.0) * length

    mass = porosity * grid.cell_area / dt
    diag = np.full(grid.ncells, mass)
    if loss is not None:
        diag = diag + porosity * grid.cell_area * np.asarray(loss, dtype=float)
    cells = np.arange(grid.ncells)
    rows = np.concatenate([cells, lo, lo, hi, hi])
    cols = np.concatenate([cells, lo, hi, lo, hi])
    data = np.concatenate([diag, a + g, b - g, -a - g, -b + g])
    return rows, cols, data


def assemble_species(grid: Grid2D, v, diffusivity, porosity: float, dt: float,
                     loss=None) -> sparse.csr_matrix:
    """Implicit upwind advection-diffusion matrix of one species.

    ``diffusivity`` is the (2,) diagonal of the species tensor, ``loss``
    an optional non-negative per-cell decay coefficient.
    """
    rows, cols, data = _species_entries(grid, v, diffusivity, porosity, dt, loss)
    return sparse.csr_matrix((data, (rows, cols)), shape=(grid.ncells, grid.ncells))


# banded LU beats sparse LU on the small grids this solver targets
_BANDED_MAX_NX = 64


def _solve_species(grid: Grid2D, rows, cols, data, rhs) -> np.ndarray:
    n = grid.ncells
    w = grid.nx
    if w <= _BANDED_MAX_NX:
        # cells k and k +- nx are the widest coupling in row-major numbering
        flat = (w + rows - cols) * n + cols
        ab = np.bincount(flat, weights=data, minlength=(2 * w + 1) * n).reshape(2 * w + 1, n)
        return solve_banded((w, w), ab, rhs, check_finite=False)
    A = sparse.csc_matrix((data, (rows, cols)), shape=(n, n))
    return np.atleast_1d(spsolve(A, rhs))


def transport_rhs(grid: Grid2D, c_old, porosity: float, dt: float, production=None):
    rhs = porosity * grid.cell_area / dt * np.asarray(c_old, dtype=float)
    if production is not None:
        rhs = rhs + porosity * grid.cell_area * np.asarray(production, dtype=float)
    return rhs


def step_species(grid: Grid2D, c_old, E, q, dt: float, reactions: ReactionSpec,
                 params: ModelParams, *, c_frozen=None, t: float = 0.0,
                 clamp_threshold: float = CLAMP_THRESHOLD) -> TransportResult:
    """Advance every species by ``dt`` with fields ``E``, ``q`` held fixed.

    ``c_frozen`` is the outer iterate at which reactions are evaluated
    (defaults to ``c_old``).  Values in ``[clamp_threshold, 0)`` are set to
    zero and counted; anything lower raises :class:`NegativeConcentration`.
    """
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    c_old = np.atleast_2d(np.asarray(c_old, dtype=float))
    L = params.species_count
    if c_old.shape != (L, grid.ncells):
        raise ValueError(f"concentrations have shape {c_old.shape}, expected {(L, grid.ncells)}")
    frozen = c_old if c_frozen is None else np.atleast_2d(np.asarray(c_frozen, dtype=float))
    if reactions.active:
        prod, loss = split_reactions(reactions, frozen)
    else:
        prod = loss = None
    theta = params.porosity

    def solve(l):
        v = species_velocity(E, q, params.valencies[l], params)
        entries = _species_entries(grid, v, params.diffusivities[l], theta, dt,
                                   None if loss is None else loss[l])
        rhs = transport_rhs(grid, c_old[l], theta, dt, None if prod is None else prod[l])
        x = _solve_species(grid, *entries, rhs)
        if not np.all(np.isfinite(x)):
            raise NonConvergence(f"transport solve for species {l} produced non-finite values")
        return x

    workers = min(max_threads(), L)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            c_new = np.array(list(pool.map(solve, range(L))))
    else:
        c_new = np.array([solve(l) for l in range(L)])

    low = float(c_new.min())
    if low < clamp_threshold:
        l = int(np.argmin(c_new.min(axis=1)))
        raise NegativeConcentration(
            f"species {l} reached {low:.3e} at t={t + dt:g}, below rounding floor "
            f"{clamp_threshold:g}", species=l, value=low)
    neg = c_new < 0
    events = int(neg.sum())
    if events:
        c_new[neg] = 0.0
    return TransportResult(c_new, events, low)
