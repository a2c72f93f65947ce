"""Jacobi-preconditioned conjugate gradient for the sparse SPD systems of the package.

The iteration starts from the zero vector and is fully deterministic.
Convergence is judged on the true residual ``b - A x`` in the infinity
norm; when the recursively updated residual says "converged" but the true
one disagrees, the iteration restarts from the current iterate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ..errors import NumericalFailureError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    residual: float
    iterations: int


def _inf_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def conjugate_gradient(
    matrix: sparse.spmatrix | np.ndarray,
    rhs: np.ndarray,
    *,
    tolerance: float = 1e-10,
    max_iter: int | None = None,
) -> SolveResult:
    """Solve ``matrix @ x = rhs`` for one right-hand side.

    ``max_iter`` defaults to ten times the system size. Raises
    :class:`NumericalFailureError` with the final residual when the
    tolerance is not reached.
    """
    A = sparse.csr_matrix(matrix)
    b = np.asarray(rhs, dtype=np.float64).reshape(-1)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match right-hand side of length {n}")
    limit = 10 * n if max_iter is None else int(max_iter)
    x = np.zeros(n)
    if n == 0:
        return SolveResult(x, 0.0, 0)

    diag = A.diagonal()
    if np.any(diag <= 0):
        raise NumericalFailureError("matrix has a non-positive diagonal entry", float("inf"))
    inv_diag = 1.0 / diag

    r = b.copy()
    z = r * inv_diag
    p = z.copy()
    rz = float(r @ z)
    iterations = 0
    while True:
        if _inf_norm(r) <= tolerance:
            true_r = b - A @ x
            if _inf_norm(true_r) <= tolerance:
                break
            r = true_r
            z = r * inv_diag
            p = z.copy()
            rz = float(r @ z)
        if iterations >= limit:
            break
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = r * inv_diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p if rz != 0.0 else z
        rz = rz_new
        iterations += 1

    residual = _inf_norm(b - A @ x)
    if residual > tolerance:
        logger.warning("cg_solve size=%d iterations=%d residual=%.3e status=failed", n, iterations, residual)
        raise NumericalFailureError(f"conjugate gradient did not converge in {iterations} iterations", residual)
    logger.debug("cg_solve size=%d iterations=%d residual=%.3e status=ok", n, iterations, residual)
    return SolveResult(x, residual, iterations)


def solve_columns(
    matrix: sparse.spmatrix,
    rhs: np.ndarray,
    *,
    tolerance: float = 1e-10,
    max_iter: int | None = None,
) -> tuple[np.ndarray, float]:
    """Solve column by column; returns the solution block and the worst residual."""
    b = np.asarray(rhs, dtype=np.float64)
    if b.ndim == 1:
        b = b[:, None]
    out = np.zeros_like(b)
    worst = 0.0
    for k in range(b.shape[1]):
        result = conjugate_gradient(matrix, b[:, k], tolerance=tolerance, max_iter=max_iter)
        out[:, k] = result.x
        worst = max(worst, result.residual)
    return out, worst
