"""Random admissible problems shared by the unit and acceptance tests."""
from __future__ import annotations

import numpy as np

from dpnp import BoundaryData, Grid2D, ModelParams, Problem, ReactionSpec, charge_density
from dpnp.profiles import Tabulated


def balanced_boundary(rng, grid, scale):
    """Random boundary values whose length-weighted sum vanishes."""
    f = rng.uniform(-scale, scale, len(grid.boundary_faces))
    w = grid.face_length[grid.boundary_faces]
    return f - (f @ w) / w.sum()


def random_problem(rng, grid=None, *, species=None, zmax=3, cmax=10.0, sigma=1.0, flux=1.0,
                   rho_b=1.0, reactions=None, neutral=False, solver=None):
    """A random admissible problem and initial data.

    Valencies come from ``-zmax..zmax``.  ``rho_b`` gets a constant offset
    that balances the initial charge against the surface charge.  With
    ``neutral=True`` the valencies include both signs (or are all zero) and
    the anions are rescaled so the initial data carry no net charge; no
    offset is added then.
    """
    grid = grid or Grid2D(16, 16)
    L = species or int(rng.integers(1, 5))
    while True:
        z = tuple(int(v) for v in rng.integers(-zmax, zmax + 1, size=L))
        if not neutral or not any(z) or (max(z) > 0 and min(z) < 0):
            break
    params = ModelParams(z, rng.uniform(0.1, 2.0, size=(L, 2)), porosity=rng.uniform(0.3, 1.0),
                         viscosity=rng.uniform(0.5, 2.0), permeability=rng.uniform(0.5, 2.0, 2))
    c0 = rng.uniform(0.0, cmax, size=(L, grid.ncells))
    if neutral and any(z):
        zc = np.array(z, float)[:, None] * c0
        neg = np.array(z) < 0
        c0[neg] *= zc[~neg].sum() / -zc[neg].sum()
    sig = Tabulated(tuple(rng.uniform(-sigma, sigma, len(grid.boundary_faces)))) if sigma else 0.0
    f = Tabulated(tuple(balanced_boundary(rng, grid, flux))) if flux else 0.0
    rb = Tabulated(tuple(rng.uniform(-rho_b, rho_b, grid.ncells))) if rho_b else 0.0
    bc = BoundaryData(sig, f, rb)
    w = grid.face_length[grid.boundary_faces]
    net = float(bc.sigma_at(grid) @ w - (charge_density(c0, params) + bc.rho_b_at(grid)).sum()
                * grid.cell_area)
    if net != 0.0 and not neutral:
        bc = bc.with_offset(net / grid.area)
    kwargs = {} if solver is None else {"solver": solver}
    problem = Problem(grid, params, reactions or ReactionSpec(), bc, **kwargs)
    return problem, c0
