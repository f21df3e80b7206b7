"""Physical parameters, reaction rates and boundary data of the electrolyte model.

Everything here is immutable once built.  :func:`validate` checks the
standing modelling assumptions (positivity, ellipticity, quasi-positive
Lipschitz reactions, bounded and compatible boundary data) and reports
each one instead of raising, so callers can show every problem at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import profiles
from .grid import Grid2D


@dataclass(frozen=True)
class ModelParams:
    """Constants of the model.

    ``diffusivities`` has shape ``(L, 2)`` (diagonal of each species'
    tensor), ``permeability`` shape ``(2,)``.  ``charge_prefactor`` converts
    ``porosity * sum(z_l c_l)`` into the free charge density; it defaults
    to ``elementary_charge``.
    """

    valencies: tuple
    diffusivities: np.ndarray
    porosity: float = 1.0
    viscosity: float = 1.0
    permittivity: float = 1.0
    elementary_charge: float = 1.0
    thermal_energy: float = 1.0
    permeability: np.ndarray = field(default_factory=lambda: np.ones(2))
    charge_prefactor: float | None = None

    def __post_init__(self):
        z = tuple(int(v) for v in self.valencies)
        if any(zi != vi for zi, vi in zip(z, self.valencies)):
            raise ValueError(f"valencies must be integers, got {self.valencies}")
        if len(z) < 1:
            raise ValueError("at least one species is required")
        D = np.asarray(self.diffusivities, dtype=float)
        if D.ndim == 1:
            D = np.column_stack([D, D])
        if D.shape != (len(z), 2):
            raise ValueError(f"diffusivities shape {D.shape} does not match {len(z)} species")
        K = np.asarray(self.permeability, dtype=float)
        if K.ndim == 0:
            K = np.array([float(K), float(K)])
        if K.shape != (2,):
            raise ValueError(f"permeability must be a 2-vector diagonal, got shape {K.shape}")
        D.setflags(write=False)
        K.setflags(write=False)
        object.__setattr__(self, "valencies", z)
        object.__setattr__(self, "diffusivities", D)
        object.__setattr__(self, "permeability", K)
        if self.charge_prefactor is None:
            object.__setattr__(self, "charge_prefactor", float(self.elementary_charge))

    @property
    def species_count(self) -> int:
        return len(self.valencies)

    @property
    def drift_coefficients(self) -> np.ndarray:
        """``e * z_l / (permittivity * k_B T)`` per species."""
        z = np.asarray(self.valencies, dtype=float)
        return self.elementary_charge * z / (self.permittivity * self.thermal_energy)


@dataclass(frozen=True)
class MassActionReaction:
    """``sum reactants -> sum products`` with rate ``k * prod(c_j^nu_j)``.

    ``reactants`` and ``products`` map species index to stoichiometric
    coefficient.
    """

    reactants: dict
    products: dict
    rate: float


@dataclass(frozen=True)
class ReactionSpec:
    """Reaction rates ``R_l(c_1, ..., c_L)``.

    kind is one of ``"none"``, ``"linear_decay"`` (``rates``),
    ``"mass_action"`` (``reactions``) or ``"custom"`` (``func`` with declared
    ``lipschitz`` constants).  A custom ``func`` maps an ``(L, n)`` array to
    an ``(L, n)`` array.
    """

    kind: str = "none"
    rates: tuple = ()
    reactions: tuple = ()
    func: Callable | None = None
    lipschitz: tuple = ()

    def __post_init__(self):
        if self.kind not in ("none", "linear_decay", "mass_action", "custom"):
            raise ValueError(f"unknown reaction kind {self.kind!r}")
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        object.__setattr__(self, "lipschitz", tuple(float(r) for r in self.lipschitz))
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom reactions need a callable 'func'")

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def linear_decay(cls, rates):
        return cls(kind="linear_decay", rates=tuple(rates))

    @classmethod
    def mass_action(cls, reactions):
        return cls(kind="mass_action", reactions=tuple(reactions))

    @classmethod
    def custom(cls, func, lipschitz):
        return cls(kind="custom", func=func, lipschitz=tuple(lipschitz))

    @property
    def active(self) -> bool:
        return self.kind != "none"

    def lipschitz_constants(self, species_count: int, c_bound: float = 1.0) -> np.ndarray:
        """Lipschitz constant of each ``R_l``.

        Mass action is only locally Lipschitz; its constant is taken over the
        box ``[0, c_bound]^L``.
        """
        L = species_count
        if self.kind == "none":
            return np.zeros(L)
        if self.kind == "linear_decay":
            return np.abs(np.asarray(self.rates, dtype=float))
        if self.kind == "custom":
            return np.asarray(self.lipschitz, dtype=float)
        out = np.zeros(L)
        for rx in self.reactions:
            # sup over the box of the l1 norm of the rate gradient
            order = sum(rx.reactants.values())
            grad = rx.rate * sum(
                nu * c_bound ** (order - 1) for nu in rx.reactants.values()) if order else 0.0
            for l, nu in list(rx.reactants.items()) + list(rx.products.items()):
                out[l] += nu * grad
        return out


def evaluate_reactions(spec: ReactionSpec, c) -> np.ndarray:
    """Reaction rates ``R_l(c)`` per species and cell; ``c`` has shape ``(L, n)``."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    if spec.kind == "none":
        return np.zeros_like(c)
    if spec.kind == "linear_decay":
        rates = np.asarray(spec.rates, dtype=float)
        if rates.size != c.shape[0]:
            raise ValueError(f"{rates.size} decay rates for {c.shape[0]} species")
        return -rates[:, None] * c
    if spec.kind == "mass_action":
        out = np.zeros_like(c)
        for rx in spec.reactions:
            r = _mass_action_rate(rx, c)
            for l, nu in rx.reactants.items():
                out[l] -= nu * r
            for l, nu in rx.products.items():
                out[l] += nu * r
        return out
    out = np.asarray(spec.func(c), dtype=float)
    if out.shape != c.shape:
        raise ValueError(f"custom reaction returned shape {out.shape}, expected {c.shape}")
    return out


def _mass_action_rate(rx, c):
    # positive parts keep the law quasi-positive off the non-negative orthant
    r = np.full(c.shape[1], float(rx.rate))
    for j, nu in rx.reactants.items():
        r = r * np.maximum(c[j], 0.0) ** nu
    return r


def split_reactions(spec: ReactionSpec, c) -> tuple[np.ndarray, np.ndarray]:
    """Write ``R_l(c) = production_l - loss_l * c_l`` with both parts non-negative.

    The loss coefficient goes on the diagonal of the implicit transport
    system and the production into its right-hand side, which keeps the
    system an M-matrix.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    prod = np.zeros_like(c)
    loss = np.zeros_like(c)
    if spec.kind == "none":
        return prod, loss
    if spec.kind == "linear_decay":
        rates = np.asarray(spec.rates, dtype=float)
        if rates.size != c.shape[0]:
            raise ValueError(f"{rates.size} decay rates for {c.shape[0]} species")
        loss += np.maximum(rates, 0.0)[:, None]
        prod += np.maximum(-rates, 0.0)[:, None] * c
        return prod, loss
    if spec.kind == "mass_action":
        cp = np.maximum(c, 0.0)
        for rx in spec.reactions:
            r = _mass_action_rate(rx, c)
            for l, nu in rx.products.items():
                prod[l] += nu * r
            for l, nu in rx.reactants.items():
                # nu * k * c_l^(nu-1) * prod_{j != l} c_j^nu_j
                part = np.full(c.shape[1], nu * float(rx.rate))
                for j, nj in rx.reactants.items():
                    part = part * cp[j] ** (nj - 1 if j == l else nj)
                loss[l] += part
        return prod, loss
    r = evaluate_reactions(spec, c)
    prod = np.maximum(r, 0.0)
    neg = np.maximum(-r, 0.0)
    safe = c > 1e-300
    loss = np.where(safe, neg / np.where(safe, c, 1.0), 0.0)
    return prod, loss


class BoundaryData:
    """Surface charge ``sigma``, normal fluid flux ``f`` and background charge ``rho_b``.

    Each entry is a profile from :mod:`dpnp.profiles` or any callable
    ``(grid, t) -> array``; boundary arrays follow the outward-normal
    convention and run over ``grid.boundary_faces``.  Callables need an
    explicit bound.  ``rho_b_offset`` is a constant added to the background
    charge (used to make pure-Neumann Gauss data compatible).  With
    ``neutralizing`` the background additionally absorbs, at every Gauss
    solve, whatever net charge imbalance the current iterate carries.
    """

    def __init__(self, sigma=0.0, fluid_flux=0.0, background_charge=0.0, *,
                 rho_b_offset=0.0, bounds=None, neutralizing=False):
        self.sigma = _as_profile(sigma)
        self.fluid_flux = _as_profile(fluid_flux)
        self.background_charge = _as_profile(background_charge)
        self.rho_b_offset = float(rho_b_offset)
        self._bounds = dict(bounds or {})
        self.neutralizing = bool(neutralizing)

    def sigma_at(self, grid: Grid2D, t: float = 0.0) -> np.ndarray:
        return _evaluate_boundary(self.sigma, grid, t)

    def flux_at(self, grid: Grid2D, t: float = 0.0) -> np.ndarray:
        return _evaluate_boundary(self.fluid_flux, grid, t)

    def rho_b_at(self, grid: Grid2D, t: float = 0.0) -> np.ndarray:
        p = self.background_charge
        vals = p(grid, t) if callable(p) else profiles.cell_values(p, grid)
        return np.asarray(vals, dtype=float) + self.rho_b_offset

    def bound(self, name: str) -> float:
        """Declared sup-norm bound of ``sigma``, ``fluid_flux`` or ``background_charge``."""
        if name in self._bounds:
            return float(self._bounds[name])
        p = getattr(self, name)
        if callable(p):
            raise ValueError(f"callable {name} needs an explicit bound")
        b = p.bound()
        if name == "background_charge":
            b = _offset_bound(p, self.rho_b_offset)
        return b

    def with_offset(self, offset: float, neutralizing: bool | None = None) -> "BoundaryData":
        return BoundaryData(self.sigma, self.fluid_flux, self.background_charge,
                            rho_b_offset=offset, bounds=self._bounds,
                            neutralizing=self.neutralizing if neutralizing is None else neutralizing)


def _offset_bound(p, offset):
    if isinstance(p, profiles.Constant):
        return abs(p.value + offset)
    return p.bound() + abs(offset)


def _as_profile(p):
    if callable(p) and not hasattr(p, "kind"):
        return p
    if hasattr(p, "kind"):
        return p
    return profiles.profile_from_dict(p)


def _evaluate_boundary(p, grid, t):
    vals = p(grid, t) if callable(p) else profiles.boundary_values(p, grid)
    return np.asarray(vals, dtype=float)


def charge_density(c, params: ModelParams) -> np.ndarray:
    """Free charge ``charge_prefactor * porosity * sum_l z_l c_l`` per cell."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    if c.shape[0] != params.species_count:
        raise ValueError(f"got {c.shape[0]} concentration fields for {params.species_count} species")
    z = np.asarray(params.valencies, dtype=float)
    return params.charge_prefactor * params.porosity * (z @ c)


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __str__(self):
        return "\n".join(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in self.checks)


def validate(params: ModelParams, reactions: ReactionSpec, bc: BoundaryData, grid: Grid2D,
             initial=None, *, t: float = 0.0, samples: int = 2000, seed: int = 0,
             compat_tol: float | None = None) -> ValidationReport:
    """Check the modelling assumptions; every check is reported, none raises."""
    checks = []
    if initial is not None:
        c0 = np.asarray(initial, dtype=float)
        ok = bool(np.all(np.isfinite(c0)) and np.all(c0 >= 0))
        checks.append(AssumptionCheck(
            "initial data", ok,
            f"min {np.min(c0):.3g}, max {np.max(c0):.3g}" if c0.size else "empty"))

    D, K = params.diffusivities, params.permeability
    checks.append(AssumptionCheck(
        "ellipticity", bool(np.all(D > 0) and np.all(K > 0) and np.all(np.isfinite(D))),
        f"min diffusivity {D.min():.3g}, min permeability {K.min():.3g}"))

    bad = [(n, v) for n, v in (("porosity", params.porosity), ("viscosity", params.viscosity),
                               ("permittivity", params.permittivity),
                               ("thermal_energy", params.thermal_energy))
           if not (np.isfinite(v) and v > 0)]
    checks.append(AssumptionCheck(
        "positive coefficients", not bad,
        ", ".join(f"{n}={v}" for n, v in bad) if bad else "all positive"))

    checks.extend(_reaction_checks(reactions, params.species_count, samples, seed))

    for label, name in (("surface charge bounded", "sigma"),
                        ("fluid flux bounded", "fluid_flux"),
                        ("background charge bounded", "background_charge")):
        try:
            b = bc.bound(name)
            checks.append(AssumptionCheck(label, bool(np.isfinite(b)), f"bound {b:.3g}"))
        except ValueError as exc:
            checks.append(AssumptionCheck(label, False, str(exc)))

    f = bc.flux_at(grid, t)
    net = float(np.sum(f * grid.face_length[grid.boundary_faces]))
    tol = compat_tol if compat_tol is not None else 1e-10 * grid.area
    checks.append(AssumptionCheck(
        "fluid flux compatibility", abs(net) <= tol, f"net boundary inflow {net:.3g}"))
    return ValidationReport(tuple(checks))


def _reaction_checks(spec, L, samples, seed):
    zero = evaluate_reactions(spec, np.zeros((L, 1)))
    checks = [AssumptionCheck("R(0) = 0", bool(np.allclose(zero, 0.0, atol=1e-14)),
                              f"max |R(0)| = {np.max(np.abs(zero)):.3g}")]
    if spec.kind in ("none", "mass_action"):
        checks.append(AssumptionCheck("quasi-positivity", True, "structural"))
    elif spec.kind == "linear_decay":
        ok = all(r >= 0 for r in spec.rates) and len(spec.rates) == L
        checks.append(AssumptionCheck("quasi-positivity", ok, f"rates {spec.rates}"))
    else:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for l in range(L):
            c = rng.uniform(0.0, 10.0, size=(L, samples))
            c[l] = -rng.uniform(0.0, 10.0, size=samples) * (rng.random(samples) < 0.5)
            worst = min(worst, float(np.min(evaluate_reactions(spec, c)[l])))
        checks.append(AssumptionCheck("quasi-positivity", worst >= 0.0,
                                      f"min R_l with c_l <= 0: {worst:.3g} (sampled)"))
    lip = spec.lipschitz_constants(L)
    checks.append(AssumptionCheck("Lipschitz", bool(lip.size == L and np.all(np.isfinite(lip))),
                                  f"constants {np.round(lip, 6).tolist()}"))
    return checks
