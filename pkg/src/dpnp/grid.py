"""Uniform rectangular grid and the two-point finite-volume operators.

Cells are numbered row by row, ``k = j * nx + i``.  Faces come in two
blocks: first the x-faces (normal along +x, ``(nx + 1) * ny`` of them,
numbered ``j * (nx + 1) + i``), then the y-faces (normal along +y,
``nx * (ny + 1)``, numbered ``n_xfaces + j * nx + i``).

A face field stores one normal component per face, always oriented along
the positive coordinate axis.  Boundary data (``E.nu = sigma``,
``q.nu = f``) is given in the outward convention; ``Grid2D.boundary_sign``
converts between the two.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid needs positive integer cell counts, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError(f"grid lengths must be positive, got {self.lx}, {self.ly}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    @property
    def n_xfaces(self) -> int:
        return (self.nx + 1) * self.ny

    @property
    def n_yfaces(self) -> int:
        return self.nx * (self.ny + 1)

    @property
    def nfaces(self) -> int:
        return self.n_xfaces + self.n_yfaces

    @cached_property
    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        X, Y = np.meshgrid(x, y)
        return X.ravel(), Y.ravel()

    @cached_property
    def face_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xf = np.arange(self.nx + 1) * self.hx
        yc = (np.arange(self.ny) + 0.5) * self.hy
        X1, Y1 = np.meshgrid(xf, yc)
        xc = (np.arange(self.nx) + 0.5) * self.hx
        yf = np.arange(self.ny + 1) * self.hy
        X2, Y2 = np.meshgrid(xc, yf)
        return (np.concatenate([X1.ravel(), X2.ravel()]),
                np.concatenate([Y1.ravel(), Y2.ravel()]))

    @cached_property
    def face_axis(self) -> np.ndarray:
        """0 for x-faces, 1 for y-faces."""
        return np.concatenate([np.zeros(self.n_xfaces, dtype=int),
                               np.ones(self.n_yfaces, dtype=int)])

    @cached_property
    def face_length(self) -> np.ndarray:
        return np.where(self.face_axis == 0, self.hy, self.hx)

    @cached_property
    def face_spacing(self) -> np.ndarray:
        """Distance between the centres of the two cells sharing the face."""
        return np.where(self.face_axis == 0, self.hx, self.hy)

    @cached_property
    def face_cells(self) -> np.ndarray:
        """(nfaces, 2) array of (lower, upper) cell indices, -1 outside the domain."""
        nx, ny = self.nx, self.ny
        i, j = np.meshgrid(np.arange(nx + 1), np.arange(ny))
        i, j = i.ravel(), j.ravel()
        xlo = np.where(i > 0, j * nx + i - 1, -1)
        xhi = np.where(i < nx, j * nx + i, -1)
        i, j = np.meshgrid(np.arange(nx), np.arange(ny + 1))
        i, j = i.ravel(), j.ravel()
        ylo = np.where(j > 0, (j - 1) * nx + i, -1)
        yhi = np.where(j < ny, j * nx + i, -1)
        return np.column_stack([np.concatenate([xlo, ylo]), np.concatenate([xhi, yhi])])

    @cached_property
    def interior_faces(self) -> np.ndarray:
        fc = self.face_cells
        return np.flatnonzero((fc[:, 0] >= 0) & (fc[:, 1] >= 0))

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        fc = self.face_cells
        return np.flatnonzero((fc[:, 0] < 0) | (fc[:, 1] < 0))

    @cached_property
    def boundary_sign(self) -> np.ndarray:
        """+1 where the outward normal points along +axis, -1 where it points along -axis."""
        fc = self.face_cells[self.boundary_faces]
        return np.where(fc[:, 1] < 0, 1.0, -1.0)

    @cached_property
    def boundary_cells(self) -> np.ndarray:
        fc = self.face_cells[self.boundary_faces]
        return np.where(fc[:, 0] >= 0, fc[:, 0], fc[:, 1])

    @cached_property
    def boundary_side(self) -> np.ndarray:
        """Side label per boundary face: 'left', 'right', 'bottom' or 'top'."""
        axis = self.face_axis[self.boundary_faces]
        sign = self.boundary_sign
        names = np.empty(len(sign), dtype=object)
        names[(axis == 0) & (sign < 0)] = "left"
        names[(axis == 0) & (sign > 0)] = "right"
        names[(axis == 1) & (sign < 0)] = "bottom"
        names[(axis == 1) & (sign > 0)] = "top"
        return names

    @cached_property
    def divergence_matrix(self) -> sparse.csr_matrix:
        """Sparse (ncells, nfaces) map from normal fluxes to cell divergences."""
        fc = self.face_cells
        w = self.face_length / self.cell_area
        lo, hi = fc[:, 0] >= 0, fc[:, 1] >= 0
        faces = np.arange(self.nfaces)
        rows = np.concatenate([fc[lo, 0], fc[hi, 1]])
        cols = np.concatenate([faces[lo], faces[hi]])
        data = np.concatenate([w[lo], -w[hi]])
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.ncells, self.nfaces))

    @cached_property
    def difference_matrix(self) -> sparse.csr_matrix:
        """Sparse (nfaces, ncells) map ``phi -> (phi_upper - phi_lower) / spacing``.

        Boundary rows are empty.
        """
        f = self.interior_faces
        fc = self.face_cells[f]
        inv = 1.0 / self.face_spacing[f]
        rows = np.concatenate([f, f])
        cols = np.concatenate([fc[:, 1], fc[:, 0]])
        data = np.concatenate([inv, -inv])
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.nfaces, self.ncells))

    def to_array(self, values) -> np.ndarray:
        """Reshape a cell field to ``(ny, nx)`` for plotting or output."""
        return np.asarray(values).reshape(self.ny, self.nx)

    def cell_vectors(self, u) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centred vector reconstruction of a face field (mean of opposite faces)."""
        u = np.asarray(u, dtype=float)
        ux = u[: self.n_xfaces].reshape(self.ny, self.nx + 1)
        uy = u[self.n_xfaces:].reshape(self.ny + 1, self.nx)
        return (0.5 * (ux[:, 1:] + ux[:, :-1])).ravel(), (0.5 * (uy[1:, :] + uy[:-1, :])).ravel()

    def outward(self, u) -> np.ndarray:
        """Outward normal component of a face field on the boundary faces."""
        return np.asarray(u)[self.boundary_faces] * self.boundary_sign


def divergence(grid: Grid2D, u) -> np.ndarray:
    """Cell-wise divergence of a normal-flux face field."""
    u = np.asarray(u, dtype=float)
    ux = u[: grid.n_xfaces].reshape(grid.ny, grid.nx + 1)
    uy = u[grid.n_xfaces:].reshape(grid.ny + 1, grid.nx)
    div = (ux[:, 1:] - ux[:, :-1]) / grid.hx + (uy[1:, :] - uy[:-1, :]) / grid.hy
    return div.ravel()


def face_coefficient(grid: Grid2D, coeff) -> np.ndarray:
    """Face-normal coefficient from a diagonal tensor given per cell.

    ``coeff`` may be a scalar, a length-2 diagonal, or an ``(ncells, 2)``
    array.  Interior faces use the harmonic mean of the two adjacent cell
    values of the component normal to the face; boundary faces take the
    adjacent cell value.
    """
    c = np.asarray(coeff, dtype=float)
    if c.ndim == 0:
        c = np.full((grid.ncells, 2), float(c))
    elif c.shape == (2,):
        c = np.broadcast_to(c, (grid.ncells, 2))
    elif c.shape != (grid.ncells, 2):
        raise ValueError(f"coefficient shape {c.shape} does not fit a {grid.nx}x{grid.ny} grid")
    if np.any(c <= 0) or not np.all(np.isfinite(c)):
        raise ValueError("diffusion-type coefficients must be finite and strictly positive")
    fc = grid.face_cells
    axis = grid.face_axis
    kf = np.empty(grid.nfaces)
    inner = grid.interior_faces
    a = c[fc[inner, 0], axis[inner]]
    b = c[fc[inner, 1], axis[inner]]
    kf[inner] = 2.0 * a * b / (a + b)
    bnd = grid.boundary_faces
    kf[bnd] = c[grid.boundary_cells, axis[bnd]]
    return kf


def tpfa_gradient_flux(grid: Grid2D, phi, coeff, boundary_flux=None) -> np.ndarray:
    """Two-point approximation of ``-coeff * grad(phi)`` as normal face fluxes.

    Boundary faces carry the prescribed outward normal flux
    ``boundary_flux`` (zero when omitted).
    """
    phi = np.asarray(phi, dtype=float)
    flux = -face_coefficient(grid, coeff) * (grid.difference_matrix @ phi)
    if boundary_flux is not None:
        flux[grid.boundary_faces] = np.asarray(boundary_flux, dtype=float) * grid.boundary_sign
    return flux


def tpfa_matrix(grid: Grid2D, coeff) -> sparse.csr_matrix:
    """Symmetric positive semidefinite operator ``phi -> sum of outgoing fluxes * |face|``.

    Equals ``cell_area * divergence(tpfa_gradient_flux(phi, coeff))`` for
    zero boundary flux; its null space is the constant field.
    """
    kf = face_coefficient(grid, coeff)
    D = grid.divergence_matrix * grid.cell_area
    return (D @ sparse.diags(-kf) @ grid.difference_matrix).tocsr()


@lru_cache(maxsize=64)
def cached_tpfa_matrix(grid: Grid2D, coeff) -> sparse.csr_matrix:
    """:func:`tpfa_matrix` memoised for hashable (scalar or tuple) coefficients."""
    return tpfa_matrix(grid, np.asarray(coeff, dtype=float))


def upwind_face_value(grid: Grid2D, c, v, boundary_value=None) -> np.ndarray:
    """Value of ``c`` on each face taken from the side the velocity ``v`` comes from.

    Zero velocity gives the arithmetic mean.  On boundary faces outflow uses
    the interior cell; inflow uses ``boundary_value`` (per boundary face),
    defaulting to the interior cell as well since the transport solver
    assembles no boundary flux.
    """
    c = np.asarray(c, dtype=float)
    v = np.asarray(v, dtype=float)
    fc = grid.face_cells
    out = np.empty(grid.nfaces)
    f = grid.interior_faces
    lo, hi = c[fc[f, 0]], c[fc[f, 1]]
    vf = v[f]
    out[f] = np.where(vf > 0, lo, np.where(vf < 0, hi, 0.5 * (lo + hi)))
    b = grid.boundary_faces
    inside = c[grid.boundary_cells]
    if boundary_value is None:
        out[b] = inside
    else:
        outflow = v[b] * grid.boundary_sign > 0
        out[b] = np.where(outflow, inside, np.asarray(boundary_value, dtype=float))
    return out


def l2_norm(grid: Grid2D, values) -> float:
    """Discrete L2 norm of a cell field: sqrt(sum(value^2 * area))."""
    values = np.asarray(values, dtype=float)
    return float(np.sqrt(np.sum(values ** 2) * grid.cell_area))


def face_l2_norm(grid: Grid2D, u) -> float:
    """L2 norm of a face field through its cell-centred reconstruction."""
    ux, uy = grid.cell_vectors(u)
    return float(np.sqrt(np.sum(ux ** 2 + uy ** 2) * grid.cell_area))


def gradient_l2_norm(grid: Grid2D, values) -> float:
    """Discrete H1 seminorm from interior face differences."""
    d = grid.difference_matrix @ np.asarray(values, dtype=float)
    f = grid.interior_faces
    return float(np.sqrt(np.sum(d[f] ** 2 * grid.face_spacing[f] * grid.face_length[f])))
