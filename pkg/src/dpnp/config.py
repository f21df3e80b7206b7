"""Scenario files: YAML text <-> :class:`ScenarioConfig` -> solver objects.

Units are whatever the user's nondimensionalisation says; every key is
listed in ``SCHEMA`` with a short description.  Unknown keys are errors,
reported with the line they appear on.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import profiles
from .coupling import FixedPointConfig, Problem, SolverSettings
from .errors import ConfigError
from .grid import Grid2D
from .model import (BoundaryData, MassActionReaction, ModelParams, ReactionSpec,
                    charge_density, validate)

SCHEMA = {
    "grid": {"nx": "cells along x", "ny": "cells along y",
             "lx": "domain length along x", "ly": "domain length along y"},
    "time": {"dt": "time step", "t_end": "final time"},
    "params": {"porosity": "theta, volume fraction of fluid", "viscosity": "mu",
               "permittivity": "eps", "elementary_charge": "e",
               "thermal_energy": "k_B T", "permeability": "K, scalar or [Kx, Ky]",
               "charge_prefactor": "free charge = prefactor * theta * sum z c (default e)"},
    "species": {"name": "label used in output columns", "z": "integer valency",
                "D": "diffusivity, scalar or [Dx, Dy]", "initial": "initial concentration profile"},
    "reactions": {"kind": "none | linear_decay | mass_action",
                  "rates": "decay rate per species (linear_decay)",
                  "reactions": "list of {reactants, products, rate} by species name (mass_action)"},
    "boundary": {"sigma": "outward surface charge E.nu", "fluid_flux": "outward fluid flux q.nu",
                 "rho_b": "background charge density",
                 "rho_b_compensate": "uniform neutralising background: shift rho_b so the Gauss data is "
                                     "compatible at t=0 and absorb later net-charge drift"},
    "solver": {"cg_tol": "relative CG residual", "fp_tol": "relative outer change",
               "max_outer_iters": "outer iteration cap", "omega": "relaxation in (0, 1]",
               "preconditioner": "null or jacobi", "compat_tol": "Neumann compatibility tolerance",
               "max_retries": "step halvings on outer failure"},
    "output": {"directory": "output directory", "vtk_every": "VTK snapshot stride (0 = none)",
               "csv_path": "diagnostics file name inside directory"},
}


@dataclass(frozen=True)
class GridConfig:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0


@dataclass(frozen=True)
class TimeConfig:
    dt: float
    t_end: float


@dataclass(frozen=True)
class ParamsConfig:
    porosity: float = 1.0
    viscosity: float = 1.0
    permittivity: float = 1.0
    elementary_charge: float = 1.0
    thermal_energy: float = 1.0
    permeability: tuple = (1.0, 1.0)
    charge_prefactor: float | None = None


@dataclass(frozen=True)
class SpeciesConfig:
    name: str
    z: int
    D: tuple
    initial: object


@dataclass(frozen=True)
class ReactionsConfig:
    kind: str = "none"
    rates: tuple = ()
    # each entry: (reactants, products, rate), reactant/product maps as sorted (name, nu) tuples
    reactions: tuple = ()


@dataclass(frozen=True)
class BoundaryConfig:
    sigma: object = profiles.Constant(0.0)
    fluid_flux: object = profiles.Constant(0.0)
    rho_b: object = profiles.Constant(0.0)
    rho_b_compensate: bool = False


@dataclass(frozen=True)
class SolverConfig:
    cg_tol: float = 1e-10
    fp_tol: float = 1e-8
    max_outer_iters: int = 50
    omega: float = 1.0
    preconditioner: str | None = None
    compat_tol: float | None = None
    max_retries: int = 3


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    vtk_every: int = 0
    csv_path: str = "diagnostics.csv"


@dataclass(frozen=True)
class ScenarioConfig:
    grid: GridConfig
    time: TimeConfig
    species: tuple
    params: ParamsConfig = field(default_factory=ParamsConfig)
    reactions: ReactionsConfig = field(default_factory=ReactionsConfig)
    boundary: BoundaryConfig = field(default_factory=BoundaryConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    name: str = ""
    description: str = ""

    @property
    def species_names(self) -> list:
        return [s.name for s in self.species]


# ------------------------------------------------------------------ parsing

def _line_map(node, path=(), out=None):
    """Map every key path of a composed YAML tree to its 1-based line."""
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out[path + (k.value,)] = k.start_mark.line + 1
            _line_map(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Reader:
    def __init__(self, lines):
        self.lines = lines

    def line(self, path):
        path = tuple(path)
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path)

    def fail(self, path, message):
        where = ".".join(str(p) for p in path)
        raise ConfigError(f"{where}: {message}" if where else message, self.line(path))

    def mapping(self, data, path, allowed, required=()):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            self.fail(path, f"expected a mapping, got {type(data).__name__}")
        for key in data:
            if key not in allowed:
                self.fail(tuple(path) + (key,), f"unknown key {key!r}; allowed: {', '.join(allowed)}")
        for key in required:
            if key not in data:
                self.fail(path, f"missing required key {key!r}")
        return data

    def number(self, data, path, *, integer=False, positive=False, nonneg=False, allow_none=False):
        if data is None and allow_none:
            return None
        if isinstance(data, bool) or not isinstance(data, (int, float)):
            self.fail(path, f"expected a number, got {data!r}")
        if integer and int(data) != data:
            self.fail(path, f"expected an integer, got {data!r}")
        if not math.isfinite(data):
            self.fail(path, f"must be finite, got {data!r}")
        if positive and not data > 0:
            self.fail(path, f"must be positive, got {data!r}")
        if nonneg and data < 0:
            self.fail(path, f"must be non-negative, got {data!r}")
        return int(data) if integer else float(data)

    def pair(self, data, path, positive=True):
        if isinstance(data, list):
            if len(data) != 2:
                self.fail(path, f"expected a scalar or two values, got {len(data)}")
            return tuple(self.number(v, tuple(path) + (i,), positive=positive) for i, v in enumerate(data))
        v = self.number(data, path, positive=positive)
        return (v, v)

    def profile(self, data, path):
        try:
            return profiles.profile_from_dict(data)
        except (ValueError, TypeError) as exc:
            self.fail(path, str(exc))


def _section(cls, reader, data, path, required=(), **conv):
    allowed = [f.name for f in fields(cls)]
    data = reader.mapping(data, path, allowed, required)
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = conv[key](value, (path, key)) if key in conv else value
    return cls(**kwargs)


def parse(text: str) -> ScenarioConfig:
    """Parse scenario YAML; any problem raises :class:`ConfigError` with a line number."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    if node is None:
        raise ConfigError("empty scenario file", 1)
    r = _Reader(_line_map(node))
    top = ["name", "description", "grid", "time", "params", "species", "reactions",
           "boundary", "solver", "output"]
    data = r.mapping(data, (), top, required=("grid", "time", "species"))

    def num(**kw):
        return lambda v, p: r.number(v, p[0] + (p[1],), **kw)

    grid = _section(GridConfig, r, data["grid"], ("grid",), required=("nx", "ny"),
                    nx=num(integer=True, positive=True), ny=num(integer=True, positive=True),
                    lx=num(positive=True), ly=num(positive=True))
    time = _section(TimeConfig, r, data["time"], ("time",), required=("dt", "t_end"),
                    dt=num(positive=True), t_end=num(positive=True))
    if time.t_end < time.dt:
        r.fail(("time", "t_end"), f"t_end={time.t_end} is shorter than dt={time.dt}")
    params = _section(ParamsConfig, r, data.get("params"), ("params",),
                      porosity=num(positive=True), viscosity=num(positive=True),
                      permittivity=num(positive=True), elementary_charge=num(positive=True),
                      thermal_energy=num(positive=True),
                      permeability=lambda v, p: r.pair(v, p[0] + (p[1],)),
                      charge_prefactor=num(allow_none=True))
    if params.porosity > 1:
        r.fail(("params", "porosity"), f"porosity must lie in (0, 1], got {params.porosity}")

    sp = data["species"]
    if not isinstance(sp, list) or not sp:
        r.fail(("species",), "expected a non-empty list of species")
    species = []
    for i, entry in enumerate(sp):
        path = ("species", i)
        s = _section(SpeciesConfig, r, entry, path, required=("name", "z", "D", "initial"),
                     name=lambda v, p: str(v), z=num(integer=True),
                     D=lambda v, p: r.pair(v, p[0] + (p[1],)),
                     initial=lambda v, p: r.profile(v, p[0] + (p[1],)))
        species.append(s)
    names = [s.name for s in species]
    if len(set(names)) != len(names):
        r.fail(("species",), f"species names must be unique, got {names}")

    reactions = _parse_reactions(r, data.get("reactions"), names)
    boundary = _section(BoundaryConfig, r, data.get("boundary"), ("boundary",),
                        sigma=lambda v, p: r.profile(v, p[0] + (p[1],)),
                        fluid_flux=lambda v, p: r.profile(v, p[0] + (p[1],)),
                        rho_b=lambda v, p: r.profile(v, p[0] + (p[1],)),
                        rho_b_compensate=lambda v, p: _flag(r, v, p[0] + (p[1],)))
    solver = _section(SolverConfig, r, data.get("solver"), ("solver",),
                      cg_tol=num(positive=True), fp_tol=num(positive=True),
                      max_outer_iters=num(integer=True, positive=True), omega=num(positive=True),
                      preconditioner=lambda v, p: _choice(r, v, p[0] + (p[1],), (None, "jacobi")),
                      compat_tol=num(positive=True, allow_none=True),
                      max_retries=num(integer=True, nonneg=True))
    if solver.omega > 1:
        r.fail(("solver", "omega"), f"relaxation must lie in (0, 1], got {solver.omega}")
    output = _section(OutputConfig, r, data.get("output"), ("output",),
                      directory=lambda v, p: str(v), csv_path=lambda v, p: str(v),
                      vtk_every=num(integer=True, nonneg=True))
    return ScenarioConfig(grid, time, tuple(species), params, reactions, boundary, solver,
                          output, str(data.get("name", "")), str(data.get("description", "")))


def _flag(r, v, path):
    if not isinstance(v, bool):
        r.fail(path, f"expected true or false, got {v!r}")
    return v


def _choice(r, v, path, options):
    if v not in options:
        r.fail(path, f"expected one of {options}, got {v!r}")
    return v


def _parse_reactions(r, data, names):
    path = ("reactions",)
    data = r.mapping(data, path, ["kind", "rates", "reactions"])
    kind = data.get("kind", "none")
    _choice(r, kind, path + ("kind",), ("none", "linear_decay", "mass_action"))
    rates, rxs = (), ()
    if kind == "linear_decay":
        raw = data.get("rates")
        if not isinstance(raw, list) or len(raw) != len(names):
            r.fail(path + ("rates",), f"linear_decay needs one rate per species ({len(names)})")
        rates = tuple(r.number(v, path + ("rates", i), nonneg=True) for i, v in enumerate(raw))
    elif "rates" in data:
        r.fail(path + ("rates",), f"'rates' only applies to linear_decay, not {kind}")
    if kind == "mass_action":
        raw = data.get("reactions")
        if not isinstance(raw, list) or not raw:
            r.fail(path + ("reactions",), "mass_action needs a non-empty list of reactions")
        out = []
        for i, rx in enumerate(raw):
            p = path + ("reactions", i)
            rx = r.mapping(rx, p, ["reactants", "products", "rate"], ("reactants", "products", "rate"))
            sides = []
            for side in ("reactants", "products"):
                m = r.mapping(rx[side], p + (side,), names)
                sides.append(tuple(sorted((k, r.number(v, p + (side, k), positive=True))
                                          for k, v in m.items())))
            out.append((sides[0], sides[1], r.number(rx["rate"], p + ("rate",), nonneg=True)))
        rxs = tuple(out)
    elif "reactions" in data:
        r.fail(path + ("reactions",), f"'reactions' only applies to mass_action, not {kind}")
    return ReactionsConfig(kind, rates, rxs)


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse(text)


# ------------------------------------------------------------------ serialisation

def to_dict(cfg: ScenarioConfig) -> dict:
    d = {}
    if cfg.name:
        d["name"] = cfg.name
    if cfg.description:
        d["description"] = cfg.description
    d["grid"] = asdict(cfg.grid)
    d["time"] = asdict(cfg.time)
    pa = asdict(cfg.params)
    pa["permeability"] = list(cfg.params.permeability)
    d["params"] = pa
    d["species"] = [{"name": s.name, "z": s.z, "D": list(s.D),
                     "initial": profiles.profile_to_dict(s.initial)} for s in cfg.species]
    rx = {"kind": cfg.reactions.kind}
    if cfg.reactions.kind == "linear_decay":
        rx["rates"] = list(cfg.reactions.rates)
    if cfg.reactions.kind == "mass_action":
        rx["reactions"] = [{"reactants": dict(a), "products": dict(b), "rate": k}
                           for a, b, k in cfg.reactions.reactions]
    d["reactions"] = rx
    b = cfg.boundary
    d["boundary"] = {"sigma": profiles.profile_to_dict(b.sigma),
                     "fluid_flux": profiles.profile_to_dict(b.fluid_flux),
                     "rho_b": profiles.profile_to_dict(b.rho_b),
                     "rho_b_compensate": b.rho_b_compensate}
    d["solver"] = asdict(cfg.solver)
    d["output"] = asdict(cfg.output)
    return d


def serialize(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None)


# ------------------------------------------------------------------ building solver objects

def build_params(cfg: ScenarioConfig) -> ModelParams:
    p = cfg.params
    return ModelParams(
        valencies=tuple(s.z for s in cfg.species),
        diffusivities=np.array([s.D for s in cfg.species], dtype=float),
        porosity=p.porosity, viscosity=p.viscosity, permittivity=p.permittivity,
        elementary_charge=p.elementary_charge, thermal_energy=p.thermal_energy,
        permeability=np.array(p.permeability, dtype=float), charge_prefactor=p.charge_prefactor)


def build_reactions(cfg: ScenarioConfig) -> ReactionSpec:
    rc = cfg.reactions
    if rc.kind == "linear_decay":
        return ReactionSpec.linear_decay(rc.rates)
    if rc.kind == "mass_action":
        idx = {n: i for i, n in enumerate(cfg.species_names)}
        return ReactionSpec.mass_action([
            MassActionReaction({idx[k]: v for k, v in a}, {idx[k]: v for k, v in b}, k_)
            for a, b, k_ in rc.reactions])
    return ReactionSpec.none()


def initial_concentrations(cfg: ScenarioConfig, grid: Grid2D) -> np.ndarray:
    return np.array([profiles.cell_values(s.initial, grid) for s in cfg.species])


def build(cfg: ScenarioConfig):
    """``(Problem, c0, FixedPointConfig)`` for a parsed scenario.

    Raises :class:`ConfigError` when the data violates a modelling
    assumption (negative initial data, incompatible fluid flux, ...).
    """
    g = cfg.grid
    grid = Grid2D(g.nx, g.ny, g.lx, g.ly)
    params = build_params(cfg)
    reactions = build_reactions(cfg)
    c0 = initial_concentrations(cfg, grid)
    b = cfg.boundary
    bc = BoundaryData(b.sigma, b.fluid_flux, b.rho_b)
    if b.rho_b_compensate:
        sigma_out = float(np.sum(bc.sigma_at(grid) * grid.face_length[grid.boundary_faces]))
        charge = float(np.sum(charge_density(c0, params) + bc.rho_b_at(grid)) * grid.cell_area)
        bc = bc.with_offset((sigma_out - charge) / grid.area, neutralizing=True)
    s = cfg.solver
    report = validate(params, reactions, bc, grid, c0, compat_tol=s.compat_tol)
    if not report.ok:
        raise ConfigError("scenario violates modelling assumptions:\n" +
                          "\n".join(f"  {c.name}: {c.detail}" for c in report.failures()))
    problem = Problem(grid, params, reactions, bc,
                      SolverSettings(s.cg_tol, s.compat_tol, s.preconditioner))
    fp = FixedPointConfig(cfg.time.dt, cfg.time.t_end, s.max_outer_iters, s.fp_tol, s.omega,
                          s.max_retries)
    return problem, c0, fp


# ------------------------------------------------------------------ shipped scenarios

SCENARIO_DIR = Path(__file__).with_name("scenarios")


def shipped_scenarios() -> list:
    """Names of the scenario files bundled with the package."""
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.yaml"))


def load_scenario(name_or_path) -> ScenarioConfig:
    """Load a bundled scenario by name, or any scenario file by path."""
    p = Path(name_or_path)
    if p.suffix in (".yaml", ".yml") or p.exists():
        return load(p)
    candidate = SCENARIO_DIR / f"{name_or_path}.yaml"
    if not candidate.exists():
        raise ConfigError(f"no scenario named {name_or_path!r}; shipped: "
                          f"{', '.join(shipped_scenarios())}")
    return load(candidate)
