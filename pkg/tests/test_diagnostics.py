import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpnp import BoundaryData, Grid2D, ModelParams, ReactionSpec
from dpnp.diagnostics import (drift_sign_term, entropy_total, gronwall_constants,
                              gronwall_envelopes, lyapunov)

E = math.e


def test_lyapunov_values():
    assert lyapunov(1.0) == pytest.approx(E - 1)
    assert lyapunov(E) - E == pytest.approx(0.0, abs=1e-15)
    assert lyapunov(0.0) == E
    assert np.allclose(lyapunov(np.array([0.0, 1.0])), [E, E - 1])


def test_lyapunov_rejects_negative():
    with pytest.raises(ValueError):
        lyapunov(-1e-3)


@given(st.floats(0.0, 1e6))
def test_lyapunov_dominates_identity(x):
    assert lyapunov(x) >= 0
    assert lyapunov(x) - x >= -1e-9 * max(1.0, x)


def test_entropy_examples():
    g = Grid2D(4, 4)
    assert entropy_total(np.zeros((1, 16)), g) == pytest.approx(E)
    assert entropy_total(np.ones((2, 16)), g) == pytest.approx(2 * (E - 1))
    x, _ = g.cell_centers
    half = np.where(x < 0.5, E, 0.0)[None, :]
    assert entropy_total(half, g) == pytest.approx(E)
    with pytest.raises(ValueError):
        entropy_total(-np.ones((1, 16)), g)


def test_drift_sign_examples():
    assert drift_sign_term((1, -1), (2.0, 1.0)) == 3.0
    assert drift_sign_term((1, 1, -1), (1.0, 1.0, math.sqrt(3))) == pytest.approx(
        -(2 - math.sqrt(3)), abs=1e-12)
    assert drift_sign_term((1, 2, -3), (0.0, 0.0, 0.0)) == 0.0
    with pytest.raises(ValueError):
        drift_sign_term((1, -1), (1.0,))


@given(st.floats(0, 100), st.floats(0, 100))
def test_two_species_sign_condition(a, b):
    assert drift_sign_term((1, -1), (a, b)) >= 0


def _setup(sigma=0.0, flux=0.0, reactions=None):
    g = Grid2D(4, 4)
    p = ModelParams((1, -1), [[0.5, 1.0], [1.0, 1.0]])
    c0 = np.random.default_rng(0).uniform(0, 2, (2, 16))
    return p, BoundaryData(sigma=sigma, fluid_flux=flux), reactions or ReactionSpec(), c0, g


def test_envelope_constant_without_sources():
    p, bc, r, c0, g = _setup()
    k = gronwall_constants(p, bc, r, c0, g)
    assert k.b == 0
    assert k.alpha_D == 0.5
    for t in (0.0, 1.0, 10.0):
        assert k.entropy_envelope(t) == pytest.approx(entropy_total(c0, g))


def test_envelope_continuous_at_zero():
    p, bc, r, c0, g = _setup(sigma=0.3, reactions=ReactionSpec.linear_decay([1.0, 2.0]))
    k = gronwall_constants(p, bc, r, c0, g)
    assert k.b > 0
    assert k.entropy_envelope(1e-9) == pytest.approx(k.S0, rel=1e-7)
    assert k.entropy_envelope(0.5) > k.S0
    ent, en = gronwall_envelopes(p, bc, r, c0, g, 0.0)
    assert ent == pytest.approx(k.S0)
    assert en >= k.E0


def test_energy_envelope_overflows_to_inf():
    p, bc, r, c0, g = _setup(sigma=50.0)
    k = gronwall_constants(p, bc, r, c0, g)
    assert k.energy_envelope(1.0) == math.inf
    assert k.entropy_envelope(1e6) == math.inf
