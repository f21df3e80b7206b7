import numpy as np
import pytest

import dpnp.coupling as coupling
from dpnp import BoundaryData, Grid2D, ModelParams, Problem, ReactionSpec
from dpnp.coupling import (FixedPointConfig, SolverSettings, advance, fixed_point_step,
                           initial_state, run, uniqueness_probe)
from dpnp.errors import OuterNonConvergence
from helpers import random_problem

TIGHT = SolverSettings(cg_tol=1e-13)


def test_uncoupled_problem_takes_one_iteration():
    g = Grid2D(4, 4)
    prob = Problem(g, ModelParams((0, 0), np.ones((2, 2))))
    c0 = np.random.default_rng(0).uniform(0, 1, (2, 16))
    state = initial_state(prob, c0)
    new, info = fixed_point_step(state, prob, FixedPointConfig(0.1, 1.0))
    assert info.outer_iters == 1
    assert np.all(new.E == 0) and np.all(new.q == 0)


def test_sub_solver_order():
    prob, c0 = random_problem(np.random.default_rng(1), Grid2D(4, 4), species=2)
    trace = []
    _, info = fixed_point_step(initial_state(prob, c0), prob, FixedPointConfig(0.01, 1.0), trace=trace)
    loop = trace[: 3 * info.outer_iters]
    assert loop == ["gauss", "darcy", "transport"] * info.outer_iters


def test_trajectory_length():
    g = Grid2D(3, 3)
    prob = Problem(g, ModelParams((0,), [1.0]))
    traj = run(prob, np.ones((1, 9)), FixedPointConfig(0.25, 0.75))
    assert len(traj.states) == 4 and len(traj.records) == 4
    assert traj.states[-1].t == pytest.approx(0.75)


def test_equilibrium_is_stationary():
    g = Grid2D(4, 4)
    prob = Problem(g, ModelParams((1, -1), np.ones((2, 2))))
    traj = run(prob, np.ones((2, 16)), FixedPointConfig(0.1, 0.5))
    for s in traj.states:
        assert np.allclose(s.c, 1.0, atol=1e-14)
        assert np.allclose(s.E, 0.0, atol=1e-14) and np.allclose(s.q, 0.0, atol=1e-14)


def test_runs_are_bit_identical():
    prob, c0 = random_problem(np.random.default_rng(2), Grid2D(6, 6), species=3)
    cfg = FixedPointConfig(0.005, 0.02)
    a, b = run(prob, c0, cfg), run(prob, c0, cfg)
    for x, y in zip(a.states, b.states):
        for name in ("c", "E", "q", "phi", "p"):
            assert np.array_equal(getattr(x, name), getattr(y, name))


def _contraction(dt):
    g = Grid2D(4, 4)
    rng = np.random.default_rng(3)
    prob = Problem(g, ModelParams((1,), [1.0]), bc=BoundaryData(rho_b_offset=0.0), solver=TIGHT)
    c0 = 1 + 0.5 * rng.uniform(size=(1, 16))
    prob = Problem(g, prob.params, bc=BoundaryData(background_charge=-float(c0.mean())), solver=TIGHT)
    _, info = fixed_point_step(initial_state(prob, c0), prob,
                               FixedPointConfig(dt, 1.0, fp_tol=1e-12), trace=None)
    r = np.array(info.residuals)
    return r[1:] / r[:-1], info


def test_contraction_factor_shrinks_with_dt():
    big, info = _contraction(1e-2)
    small, _ = _contraction(1e-4)
    assert info.outer_iters > 2
    assert np.all(big[:-1] < 1) and np.all(small < 1)
    assert small.max() < big.max()


@pytest.mark.parametrize("kwargs", [dict(omega=0), dict(omega=1.5), dict(fp_tol=0),
                                    dict(dt=0), dict(t_end=0.05), dict(max_outer_iters=0)])
def test_config_validation(kwargs):
    base = dict(dt=0.1, t_end=1.0)
    base.update(kwargs)
    with pytest.raises(ValueError):
        FixedPointConfig(**base)


def test_step_count_rounding():
    assert FixedPointConfig(0.1, 1.0).n_steps == 10
    assert FixedPointConfig(0.3, 1.0).n_steps == 4


def test_relaxation_reaches_same_state():
    prob, c0 = random_problem(np.random.default_rng(4), Grid2D(4, 4), species=2, solver=TIGHT)
    s = initial_state(prob, c0)
    a, _ = fixed_point_step(s, prob, FixedPointConfig(0.002, 1.0, fp_tol=1e-12, max_outer_iters=200))
    b, _ = fixed_point_step(s, prob, FixedPointConfig(0.002, 1.0, fp_tol=1e-12, omega=0.7, max_outer_iters=200))
    assert np.allclose(a.c, b.c, atol=1e-9)


def test_outer_failure_reports_history():
    prob, c0 = random_problem(np.random.default_rng(5), Grid2D(4, 4), species=2)
    with pytest.raises(OuterNonConvergence) as info:
        fixed_point_step(initial_state(prob, c0), prob,
                         FixedPointConfig(0.1, 1.0, max_outer_iters=2, fp_tol=1e-14))
    assert len(info.value.history) == 2 and info.value.iterations == 2


def test_halve_and_retry(monkeypatch):
    prob, c0 = random_problem(np.random.default_rng(6), Grid2D(4, 4), species=1)
    real = coupling.fixed_point_step

    def flaky(state, problem, cfg, dt=None, **kw):
        if dt > 0.03:
            raise OuterNonConvergence("forced", 1, [1.0])
        return real(state, problem, cfg, dt, **kw)

    monkeypatch.setattr(coupling, "fixed_point_step", flaky)
    cfg = FixedPointConfig(0.1, 1.0)
    end, info = advance(initial_state(prob, c0), prob, cfg, 0.1)
    assert info.substeps == 4 and end.t == pytest.approx(0.1)
    with pytest.raises(OuterNonConvergence):
        advance(initial_state(prob, c0), prob, FixedPointConfig(0.1, 1.0, max_retries=1), 0.1)


def test_uniqueness_probe():
    prob, c0 = random_problem(np.random.default_rng(7), Grid2D(2, 2), species=2, solver=TIGHT)
    cfg = FixedPointConfig(0.01, 1.0, fp_tol=1e-11, max_outer_iters=200)
    s = initial_state(prob, c0)
    assert uniqueness_probe(s, prob, cfg, 0.0) == 0.0
    assert uniqueness_probe(s, prob, cfg, 0.1, trials=3) <= 10 * cfg.fp_tol


def test_initial_data_checked():
    prob = Problem(Grid2D(2, 2), ModelParams((0,), [1.0]))
    with pytest.raises(ValueError):
        initial_state(prob, -np.ones((1, 4)))
    with pytest.raises(ValueError):
        initial_state(prob, np.ones((2, 4)))


def test_converged_state_is_consistent():
    prob, c0 = random_problem(np.random.default_rng(8), Grid2D(4, 4), species=3, solver=TIGHT)
    new, _ = fixed_point_step(initial_state(prob, c0), prob, FixedPointConfig(0.01, 1.0))
    from dpnp.model import charge_density
    assert np.array_equal(new.rho_f, charge_density(new.c, prob.params))
    assert new.c.min() >= 0
