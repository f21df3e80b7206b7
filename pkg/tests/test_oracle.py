import numpy as np
import pytest

from dpnp import BoundaryData, Grid2D, ModelParams, Problem, ReactionSpec
from dpnp.coupling import FixedPointConfig, SolverSettings, fixed_point_step, initial_state
from dpnp.oracle import CASES, ConvergenceTable, manufactured_errors, monolithic_step
from helpers import random_problem

TIGHT = SolverSettings(cg_tol=1e-14)


def _max_diff(a, b):
    return max(float(np.max(np.abs(getattr(a, n) - getattr(b, n)))) for n in ("c", "phi", "p", "E", "q"))


def test_single_cell_decay_hand_formula():
    prob = Problem(Grid2D(1, 1), ModelParams((0,), [1.0]), ReactionSpec.linear_decay([1.0]))
    s = monolithic_step(initial_state(prob, [[1.0]]), prob, FixedPointConfig(0.5, 1.0))
    assert s.c[0, 0] == pytest.approx(2.0 / 3.0, rel=1e-12)


def test_two_cell_diffusion_hand_formula():
    # backward Euler for two cells exchanging with conductance D/h * |face| = 2 D
    D, dt, theta = 0.7, 0.3, 0.5
    prob = Problem(Grid2D(2, 1), ModelParams((0,), [D], porosity=theta))
    s = monolithic_step(initial_state(prob, [[1.0, 3.0]]), prob, FixedPointConfig(dt, 1.0))
    m = theta * 0.5 / dt
    g = D / 0.5 * 1.0
    A = np.array([[m + g, -g], [-g, m + g]])
    assert np.allclose(s.c[0], np.linalg.solve(A, m * np.array([1.0, 3.0])), rtol=1e-13)


def test_equilibrium_is_a_fixed_point():
    prob = Problem(Grid2D(2, 2), ModelParams((1, -1), np.ones((2, 2))))
    s0 = initial_state(prob, np.ones((2, 4)))
    s = monolithic_step(s0, prob, FixedPointConfig(0.1, 1.0))
    assert np.allclose(s.c, 1.0, atol=1e-15) and np.allclose(s.phi, 0.0, atol=1e-15)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("shape", [(2, 2), (4, 2), (4, 4)])
def test_matches_fixed_point_step(seed, shape):
    prob, c0 = random_problem(np.random.default_rng(seed), Grid2D(*shape), species=2,
                              zmax=1, cmax=2.0, solver=TIGHT)
    cfg = FixedPointConfig(0.01, 1.0, fp_tol=1e-13, max_outer_iters=300)
    s = initial_state(prob, c0)
    a, _ = fixed_point_step(s, prob, cfg)
    assert _max_diff(a, monolithic_step(s, prob, cfg)) <= 1e-10


def test_size_limit():
    prob = Problem(Grid2D(5, 4), ModelParams((0,), [1.0]))
    with pytest.raises(ValueError):
        monolithic_step(initial_state(prob, np.ones((1, 20))), prob, FixedPointConfig(0.1, 1.0))


@pytest.mark.parametrize("case,lo,hi", [("poisson_cos", 3.4, 4.6),
                                        ("darcy_gradient_force", 3.4, 4.6),
                                        ("transport_translate", 1.6, 2.4)])
def test_manufactured_ratios(case, lo, hi):
    t = manufactured_errors(case, (8, 16, 32))
    assert isinstance(t, ConvergenceTable)
    assert all(lo <= r <= hi for r in t.ratios)
    assert case in str(t)


def test_unknown_case():
    assert "poisson_cos" in CASES
    with pytest.raises(ValueError):
        manufactured_errors("heat")
