"""Diagnostics CSV and legacy-VTK snapshots."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsRecord
from .grid import Grid2D


def csv_header(species_names) -> list:
    """Column names; the per-species blocks follow the species order."""
    cols = ["t", "outer_iters", "clamp_events", "entropy", "entropy_env", "charge_l2", "energy_env"]
    for s in species_names:
        cols += [f"{s}_mass", f"{s}_l2", f"{s}_linf"]
    cols += [f"{s}_grad_l2" for s in species_names]
    cols += ["E_l2", "phi_l2", "q_l2", "p_l2", "energy", "min_concentration"]
    return cols


def _fmt(x) -> str:
    return repr(float(x)) if not isinstance(x, (int, np.integer)) else str(int(x))


def csv_row(rec: DiagnosticsRecord) -> list:
    row = [_fmt(rec.t), str(rec.outer_iters), str(rec.clamp_events), _fmt(rec.entropy),
           _fmt(rec.entropy_env), _fmt(rec.charge_l2), _fmt(rec.energy_env)]
    for m, l2, linf in zip(rec.mass, rec.l2, rec.linf):
        row += [_fmt(m), _fmt(l2), _fmt(linf)]
    row += [_fmt(g) for g in rec.grad_l2]
    row += [_fmt(rec.E_l2), _fmt(rec.phi_l2), _fmt(rec.q_l2), _fmt(rec.p_l2), _fmt(rec.energy),
            _fmt(rec.min_concentration)]
    return row


class CSVWriter:
    """Streams records to a CSV file with ``,`` delimiters and LF line endings."""

    def __init__(self, path, species_names):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(csv_header(species_names))

    def write(self, rec: DiagnosticsRecord):
        self._writer.writerow(csv_row(rec))

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_csv(path, records, species_names):
    with CSVWriter(path, species_names) as w:
        for rec in records:
            w.write(rec)


def read_csv(path) -> tuple[list, np.ndarray]:
    """(header, float array of rows)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(rows[0]))


def write_vtk(path, grid: Grid2D, state, species_names, title="dpnp snapshot"):
    """Legacy VTK 3.0 ASCII structured-points file with cell data.

    Scalars: every concentration, ``phi``, ``p`` and ``rho_f``; vectors:
    cell reconstructions of ``E`` and ``q``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# vtk DataFile Version 3.0", f"{title} t={state.t:.12g}", "ASCII",
             "DATASET STRUCTURED_POINTS",
             f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
             "ORIGIN 0 0 0",
             f"SPACING {grid.hx!r} {grid.hy!r} 1",
             f"CELL_DATA {grid.ncells}"]

    def scalars(name, values):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.12e}" for v in values)

    for name, c in zip(species_names, state.c):
        scalars(name, c)
    scalars("phi", state.phi)
    scalars("p", state.p)
    scalars("rho_f", state.rho_f)
    for name, u in (("E", state.E), ("q", state.q)):
        ux, uy = grid.cell_vectors(u)
        lines.append(f"VECTORS {name} double")
        lines.extend(f"{a:.12e} {b:.12e} 0" for a, b in zip(ux, uy))
    path.write_text("\n".join(lines) + "\n")
