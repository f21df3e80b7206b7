import numpy as np
import pytest

from dpnp.errors import CompatibilityViolation
from dpnp.grid import Grid2D, divergence, l2_norm, face_l2_norm
from dpnp.model import BoundaryData, ModelParams
from dpnp.oracle import manufactured_errors
from dpnp.poisson import solve_gauss
from helpers import balanced_boundary

P = ModelParams((1,), [1.0])


def test_zero_data_gives_zero_fields():
    g = Grid2D(4, 4)
    sol = solve_gauss(g, np.zeros(16), BoundaryData(), P)
    assert np.all(sol.E == 0) and np.all(sol.phi == 0)


def test_uniform_background_with_surface_charge():
    g = Grid2D(4, 4)
    sol = solve_gauss(g, np.zeros(16), BoundaryData(sigma=0.25, background_charge=1.0), P)
    assert divergence(g, sol.E).sum() * g.cell_area == pytest.approx(1.0)
    assert (g.outward(sol.E) * g.face_length[g.boundary_faces]).sum() == pytest.approx(1.0)
    assert not sol.repaired


def test_invariants_on_random_data():
    g = Grid2D(6, 5, 1.2, 0.8)
    rng = np.random.default_rng(0)
    sigma = balanced_boundary(rng, g, 1.0)
    rho = rng.normal(size=g.ncells)
    rho -= rho.mean()
    params = ModelParams((1,), [1.0], permittivity=2.5)
    sol = solve_gauss(g, rho, BoundaryData(sigma=tuple_profile(sigma)), params, tol=1e-12)
    assert abs(sol.phi.mean()) < 1e-12
    assert np.allclose(divergence(g, sol.E), rho, atol=1e-9)
    assert np.array_equal(g.outward(sol.E), sigma)


def tuple_profile(values):
    from dpnp.profiles import Tabulated
    return Tabulated(tuple(values))


def test_manufactured_cosine_second_order():
    t = manufactured_errors("poisson_cos", (8, 16, 32))
    assert all(3.4 <= r <= 4.6 for r in t.ratios)


def test_incompatible_data_rejected():
    g = Grid2D(3, 3)
    with pytest.raises(CompatibilityViolation) as info:
        solve_gauss(g, np.ones(9), BoundaryData(), P)
    assert info.value.imbalance == pytest.approx(1.0)


def test_small_imbalance_repaired_and_flagged():
    g = Grid2D(3, 3)
    rho = np.zeros(9)
    rho[0] = 5e-10 / g.cell_area
    sol = solve_gauss(g, rho, BoundaryData(), P)
    assert sol.repaired
    with pytest.raises(CompatibilityViolation):
        solve_gauss(g, rho, BoundaryData(), P, allow_repair=False)


def test_tiny_imbalance_removed_silently():
    g = Grid2D(3, 3)
    rho = np.full(9, 1e-12)
    assert not solve_gauss(g, rho, BoundaryData(), P).repaired


def test_neutralizing_background_absorbs_net_charge():
    g = Grid2D(3, 3)
    sol = solve_gauss(g, np.ones(9), BoundaryData(neutralizing=True), P)
    assert np.allclose(sol.E, 0.0, atol=1e-12)


def test_linearity():
    g = Grid2D(5, 5)
    rng = np.random.default_rng(4)
    r1, r2 = rng.normal(size=(2, 25))
    r1 -= r1.mean()
    r2 -= r2.mean()
    s1 = solve_gauss(g, r1, BoundaryData(), P, tol=1e-13)
    s2 = solve_gauss(g, r2, BoundaryData(), P, tol=1e-13)
    s = solve_gauss(g, 2 * r1 - 3 * r2, BoundaryData(), P, tol=1e-13)
    assert np.allclose(s.phi, 2 * s1.phi - 3 * s2.phi, atol=1e-10)
    assert np.allclose(s.E, 2 * s1.E - 3 * s2.E, atol=1e-10)


def test_a_priori_bound_ratio_is_bounded():
    g = Grid2D(8, 8)
    rng = np.random.default_rng(7)
    ratios = []
    for _ in range(20):
        rho = rng.normal(size=g.ncells) * rng.uniform(0.1, 10)
        rho -= rho.mean()
        sol = solve_gauss(g, rho, BoundaryData(), P)
        ratios.append((l2_norm(g, sol.phi) + face_l2_norm(g, sol.E)) / l2_norm(g, rho))
    assert max(ratios) < 10 * min(ratios)


def test_warm_start_gives_same_answer():
    g = Grid2D(6, 6)
    rho = np.random.default_rng(2).normal(size=36)
    rho -= rho.mean()
    a = solve_gauss(g, rho, BoundaryData(), P, tol=1e-13)
    b = solve_gauss(g, rho, BoundaryData(), P, tol=1e-13, x0=a.phi + 3.0)
    assert np.allclose(a.phi, b.phi, atol=1e-12)
    assert b.cg_iterations <= 1
