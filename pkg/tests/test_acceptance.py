"""One check per acceptance criterion; each prints a PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from dpnp import FixedPointConfig, Grid2D, run
from dpnp.cli import THREE_SPECIES_CONCENTRATIONS, THREE_SPECIES_VALENCIES, sign_probe
from dpnp.config import build, load_scenario, shipped_scenarios
from dpnp.coupling import SolverSettings
from dpnp.diagnostics import drift_sign_term
from dpnp.oracle import MAX_CELLS, manufactured_errors
from dpnp.transport import CLAMP_THRESHOLD
from dpnp.verify import (ORACLE_TOL, UNIQUENESS_FACTOR, check_boundedness, check_envelopes,
                         check_oracle, check_uniqueness, entropy_increase, mass_drift,
                         oracle_difference)
from helpers import random_problem


def report(number, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number} ({title}): {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


@pytest.fixture(scope="module")
def shipped():
    """Every shipped scenario built and integrated once over its full horizon."""
    out = {}
    for name in shipped_scenarios():
        problem, c0, fp = build(load_scenario(name))
        out[name] = (problem, c0, fp, run(problem, c0, fp, keep_states=True))
    return out


def test_criterion_1_nonnegativity():
    runs, steps, dt = 50, 100, 0.002
    start = time.perf_counter()
    worst, clamped, failures = math.inf, 0, []
    for seed in range(runs):
        problem, c0 = random_problem(np.random.default_rng(seed))
        try:
            traj = run(problem, c0, FixedPointConfig(dt, steps * dt), keep_states=False)
        except Exception as exc:  # any failure counts against the criterion
            failures.append(f"seed {seed}: {type(exc).__name__}")
            continue
        worst = min(worst, min(r.min_concentration for r in traj.records))
        clamped += any(r.clamp_events for r in traj.records)
    elapsed = time.perf_counter() - start
    ok = (not failures and worst >= CLAMP_THRESHOLD and clamped <= 0.05 * runs
          and elapsed <= 300)
    report(1, "non-negativity", ok,
           f"{runs} runs on 16x16, {steps} steps: min before clamping {worst:.3e}, "
           f"runs with clamping {clamped}, failures {failures or 0}, {elapsed:.0f} s")


def test_criterion_2_entropy_dissipation():
    worst = -math.inf
    for seed in range(10):
        problem, c0 = random_problem(np.random.default_rng(1000 + seed), Grid2D(12, 12),
                                     sigma=0, flux=0, rho_b=0, neutral=True)
        traj = run(problem, c0, FixedPointConfig(0.005, 0.25), keep_states=False)
        worst = max(worst, entropy_increase(traj))
    report(2, "entropy dissipation", worst <= 1e-10,
           f"10 runs, largest per-step entropy increase {worst:.3e} (slack 1e-10)")


def test_criterion_3_envelopes(shipped):
    bad = []
    for name, (_, _, _, traj) in shipped.items():
        bad += [f"{name}: {r}" for r in check_envelopes(traj) if not r.passed]
    report(3, "entropy and energy envelopes", not bad,
           f"{len(shipped)} scenarios, violations: {bad or 'none'}")


def test_criterion_4_mass_conservation():
    worst = 0.0
    for seed in range(5):
        problem, c0 = random_problem(np.random.default_rng(2000 + seed), Grid2D(8, 8),
                                     sigma=0, flux=0, rho_b=0, neutral=True)
        traj = run(problem, c0, FixedPointConfig(0.005, 1.0), keep_states=False)
        assert len(traj.records) == 201
        worst = max(worst, mass_drift(traj))
    report(4, "mass conservation", worst <= 1e-11,
           f"5 runs of 200 steps, max relative drift {worst:.3e}")


def test_criterion_5_oracle_equivalence(shipped):
    worst, cases = 0.0, 0
    for name, (problem, _, fp, traj) in shipped.items():
        if problem.grid.ncells <= MAX_CELLS:
            r = check_oracle(problem, fp, traj)
            worst = max(worst, float(r.detail.split()[2]))
            cases += 1
    tight = SolverSettings(cg_tol=1e-14)
    for seed in range(12):
        rng = np.random.default_rng(3000 + seed)
        shape = [(2, 2), (4, 2), (4, 4), (1, 3)][seed % 4]
        problem, c0 = random_problem(rng, Grid2D(*shape), zmax=1, cmax=2.0, solver=tight)
        fp = FixedPointConfig(0.01, 0.03, fp_tol=1e-13, max_outer_iters=300)
        traj = run(problem, c0, fp)
        worst = max(worst, oracle_difference(problem, fp, traj.states[:-1]))
        cases += 1
    report(5, "oracle equivalence", worst <= ORACLE_TOL,
           f"{cases} cases, max-abs difference {worst:.3e} (tol {ORACLE_TOL:g})")


def test_criterion_6_uniqueness(shipped):
    bad, margins = [], []
    for name, (problem, _, fp, traj) in shipped.items():
        r = check_uniqueness(problem, fp, traj)
        margins.append(f"{name} {r.detail.split()[2]}")
        if not r.passed:
            bad.append(name)
    report(6, "uniqueness probe", not bad,
           f"limit {UNIQUENESS_FACTOR:g}*fp_tol; " + ", ".join(margins))


def test_criterion_7_manufactured_convergence():
    start = time.perf_counter()
    bounds = {"poisson_cos": (3.4, 4.6), "darcy_gradient_force": (3.4, 4.6),
              "transport_translate": (1.6, 2.4)}
    parts, ok = [], True
    for case, (lo, hi) in bounds.items():
        t = manufactured_errors(case, (8, 16, 32))
        ok &= all(lo <= r <= hi for r in t.ratios)
        parts.append(f"{case} " + "/".join(f"{r:.3f}" for r in t.ratios))
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 120
    report(7, "manufactured convergence", ok, ", ".join(parts) + f", {elapsed:.1f} s")


def test_criterion_8_sign_condition():
    value = drift_sign_term(THREE_SPECIES_VALENCIES, THREE_SPECIES_CONCENTRATIONS)
    err = abs(value + (2 - math.sqrt(3)))
    low = sign_probe(1000, 0)
    report(8, "sign-condition demo", err <= 1e-12 and low >= 0,
           f"three-species value {value:.15f} (error {err:.1e}), two-species probe minimum {low:.3g}")


def test_criterion_9_boundedness(shipped):
    details, ok = [], True
    for name, (_, _, fp, traj) in shipped.items():
        r = check_boundedness(traj)
        ok &= r.passed and traj.records[-1].t == pytest.approx(1.0)
        details.append(f"{name} {r.detail.split()[4]}")
    report(9, "boundedness", ok, "growth over T=1: " + ", ".join(details))
