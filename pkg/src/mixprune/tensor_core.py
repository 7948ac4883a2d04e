"""Dense linear algebra kernel: matmul plus SPD factorization and solves.

Matrices are plain 2-D ``numpy.ndarray`` objects in row-major float64; the
:func:`as_matrix` gate enforces that at every public boundary.  Everything is
computed in 64-bit even when containers store 32-bit payloads, because the
compensation update downstream divides by inverse-Hessian diagonals and
amplifies rounding at high sparsity.

All functions are pure and thread-safe; identical inputs produce bit-identical
outputs run to run.  Ill-conditioning is not handled here: the factorization
raises :class:`~mixprune.errors.NotPositiveDefiniteError` and callers apply
dampening and retry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefiniteError, ShapeError, ValidationError

__all__ = [
    "CholeskyFactor",
    "as_matrix",
    "matmul",
    "cholesky",
    "spd_inverse",
    "solve_spd",
]

_SYMMETRY_RTOL = 1e-9


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Coerce ``data`` to a 2-D, C-contiguous float64 array with finite entries."""
    arr = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    if arr.ndim != 2:
        raise ShapeError(f"{name}: expected a 2-D matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: entries must be finite (no NaN/Inf)")
    return arr


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with L @ L.T reproducing the factored matrix."""

    dim: int
    L: np.ndarray


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Standard matrix product with a fixed, deterministic accumulation order."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions differ ({a.shape[0]}x{a.shape[1]} @ "
            f"{b.shape[0]}x{b.shape[1]})"
        )
    return a @ b


def _check_symmetric_square(a: np.ndarray, name: str) -> np.ndarray:
    a = as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"{name}: expected a square matrix, got {a.shape}")
    scale = np.abs(a).max()
    if scale > 0 and np.abs(a - a.T).max() > _SYMMETRY_RTOL * scale:
        raise ValidationError(f"{name}: matrix is not symmetric within rtol={_SYMMETRY_RTOL}")
    return a


def cholesky(a: np.ndarray) -> CholeskyFactor:
    """Unpivoted Cholesky factorization of a symmetric positive-definite matrix."""
    a = _check_symmetric_square(a, "cholesky input")
    try:
        L = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from exc
    return CholeskyFactor(dim=a.shape[0], L=L)


def spd_inverse(a: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix via Cholesky solves against identity columns.

    The result is symmetrized before returning so downstream consumers can
    rely on exact symmetry of the inverse Hessian.
    """
    factor = cholesky(a)
    inv = scipy.linalg.cho_solve((factor.L, True), np.eye(factor.dim), check_finite=False)
    return (inv + inv.T) / 2.0


def solve_spd(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = rhs`` for SPD ``a``."""
    rhs = as_matrix(rhs, "rhs")
    factor = cholesky(a)
    if rhs.shape[0] != factor.dim:
        raise ShapeError(
            f"solve_spd: rhs has {rhs.shape[0]} rows, expected {factor.dim}"
        )
    return scipy.linalg.cho_solve((factor.L, True), rhs, check_finite=False)
