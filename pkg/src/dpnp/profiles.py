"""Named spatial profiles for initial data, background charge and boundary data.

Profiles are deliberately a small closed set so scenarios never need an
expression interpreter.  Each profile evaluates on cell centres and on
boundary face centres, reports a sup-norm bound, and serialises back to
the dictionary it was built from.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import Grid2D

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class Constant:
    value: float = 0.0
    kind: str = field(default="constant", init=False)

    def at(self, x, y):
        return np.full(np.shape(x), float(self.value))

    def bound(self) -> float:
        return abs(self.value)


@dataclass(frozen=True)
class GaussianBump:
    amplitude: float = 1.0
    center: tuple = (0.5, 0.5)
    width: float = 0.1
    base: float = 0.0
    kind: str = field(default="gaussian_bump", init=False)

    def at(self, x, y):
        r2 = (np.asarray(x) - self.center[0]) ** 2 + (np.asarray(y) - self.center[1]) ** 2
        return self.base + self.amplitude * np.exp(-r2 / (2.0 * self.width ** 2))

    def bound(self) -> float:
        return abs(self.base) + abs(self.amplitude)


@dataclass(frozen=True)
class Checkerboard:
    low: float = 0.0
    high: float = 1.0
    cells: tuple = (2, 2)
    kind: str = field(default="checkerboard", init=False)

    def at(self, x, y, lx=1.0, ly=1.0):
        ix = np.floor(np.asarray(x) / lx * self.cells[0]).astype(int)
        iy = np.floor(np.asarray(y) / ly * self.cells[1]).astype(int)
        return np.where((ix + iy) % 2 == 0, self.low, self.high).astype(float)

    def bound(self) -> float:
        return max(abs(self.low), abs(self.high))


@dataclass(frozen=True)
class Cosine:
    """``base + amplitude * cos(kx*pi*x/lx) * cos(ky*pi*y/ly)``."""

    base: float = 0.0
    amplitude: float = 1.0
    kx: int = 1
    ky: int = 1
    kind: str = field(default="cosine", init=False)

    def at(self, x, y, lx=1.0, ly=1.0):
        return self.base + self.amplitude * (np.cos(self.kx * math.pi * np.asarray(x) / lx)
                                             * np.cos(self.ky * math.pi * np.asarray(y) / ly))

    def bound(self) -> float:
        return abs(self.base) + abs(self.amplitude)


@dataclass(frozen=True)
class Sides:
    """Piecewise constant boundary profile, one value per side of the rectangle."""

    left: float = 0.0
    right: float = 0.0
    bottom: float = 0.0
    top: float = 0.0
    kind: str = field(default="sides", init=False)

    def bound(self) -> float:
        return max(abs(self.left), abs(self.right), abs(self.bottom), abs(self.top))


@dataclass(frozen=True)
class Tabulated:
    """Explicit values, one per cell or one per boundary face."""

    values: tuple = ()
    kind: str = field(default="tabulated", init=False)

    def bound(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0


_KINDS = {
    "constant": Constant,
    "gaussian_bump": GaussianBump,
    "checkerboard": Checkerboard,
    "cosine": Cosine,
    "sides": Sides,
    "tabulated": Tabulated,
}


def profile_from_dict(spec) -> object:
    """Build a profile from ``{"kind": ..., **params}``; a bare number means constant."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Constant(float(spec))
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"profile must be a number or a mapping with 'kind', got {spec!r}")
    params = dict(spec)
    kind = params.pop("kind")
    if kind not in _KINDS:
        raise ValueError(f"unknown profile kind {kind!r}; choose from {sorted(_KINDS)}")
    cls = _KINDS[kind]
    allowed = {f for f in cls.__dataclass_fields__ if f != "kind"}
    extra = set(params) - allowed
    if extra:
        raise ValueError(f"profile {kind!r} does not accept {sorted(extra)}")
    for key in ("center", "cells", "values"):
        if key in params:
            params[key] = tuple(params[key])
    return cls(**params)


def profile_to_dict(profile) -> dict:
    d = asdict(profile)
    kind = d.pop("kind")
    for key, val in d.items():
        if isinstance(val, tuple):
            d[key] = list(val)
    return {"kind": kind, **d}


def cell_values(profile, grid: Grid2D) -> np.ndarray:
    """Evaluate a profile at the cell centres."""
    if isinstance(profile, Tabulated):
        vals = np.asarray(profile.values, dtype=float)
        if vals.shape != (grid.ncells,):
            raise ValueError(f"tabulated cell profile needs {grid.ncells} values, got {vals.size}")
        return vals.copy()
    if isinstance(profile, Sides):
        raise ValueError("'sides' profiles only apply to boundary data")
    x, y = grid.cell_centers
    return _evaluate(profile, x, y, grid)


def boundary_values(profile, grid: Grid2D) -> np.ndarray:
    """Evaluate a profile at the boundary face centres (outward convention)."""
    if isinstance(profile, Tabulated):
        vals = np.asarray(profile.values, dtype=float)
        if vals.shape != (len(grid.boundary_faces),):
            raise ValueError(f"tabulated boundary profile needs {len(grid.boundary_faces)} values, "
                             f"got {vals.size}")
        return vals.copy()
    if isinstance(profile, Sides):
        side = grid.boundary_side
        out = np.zeros(len(side))
        for name in SIDES:
            out[side == name] = getattr(profile, name)
        return out
    x, y = grid.face_centers
    b = grid.boundary_faces
    return _evaluate(profile, x[b], y[b], grid)


def _evaluate(profile, x, y, grid):
    if isinstance(profile, (Checkerboard, Cosine)):
        return profile.at(x, y, grid.lx, grid.ly)
    return profile.at(x, y)
