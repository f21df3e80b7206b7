"""Conjugate gradients for the singular pure-Neumann cell systems."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual_norm: float


def _zero_mean(v):
    return v - v.mean()


def conjugate_gradient(A, b, x0=None, tol=1e-10, maxiter=None, preconditioner=None,
                       project_constants=True) -> CGResult:
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A``.

    With ``project_constants`` the right-hand side, the iterates and the
    search directions are kept orthogonal to the constant vector, which
    is the null space of a pure-Neumann operator; the returned ``x`` has
    zero mean.  ``preconditioner`` is ``None`` or ``"jacobi"``.  Stops at
    ``||b - A x|| <= tol * ||b||``.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    proj = _zero_mean if project_constants else (lambda v: v)
    b = proj(b)
    x = np.zeros(n) if x0 is None else proj(np.asarray(x0, dtype=float).copy())
    if maxiter is None:
        maxiter = max(10 * n, 100)
    if preconditioner == "jacobi":
        d = np.asarray(A.diagonal(), dtype=float)
        inv_d = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 1.0)
        apply_m = lambda r: proj(inv_d * r)
    elif preconditioner is None:
        apply_m = lambda r: r
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0)
    r = b - A @ x
    r = proj(r)
    rnorm = np.linalg.norm(r)
    if rnorm <= tol * bnorm:
        return CGResult(x, 0, float(rnorm))
    z = apply_m(r)
    p = z.copy()
    rz = r @ z
    for k in range(1, maxiter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise NonConvergence(f"conjugate gradient broke down (p.Ap = {pAp:.3g})", k)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        r = proj(r)
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            return CGResult(proj(x), k, float(rnorm))
        z = apply_m(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NonConvergence(
        f"conjugate gradient did not reach relative residual {tol:g} in {maxiter} iterations "
        f"(last {rnorm / bnorm:.3g})", maxiter)
