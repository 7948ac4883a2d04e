"""Hessian accumulation from calibration activations, dampening, inversion.

The layer-wise reconstruction objective has Hessian ``H = X X^T`` where the
columns of ``X`` are calibration samples.  Containers store samples as rows
(``n_samples x d_in``), so accumulation computes ``batch.T @ batch`` and adds
it in; the transpose happens exactly once, here.

Accumulation is a single-owner fold: batches may be prepared concurrently but
are applied in manifest order, and the state is never mutated in place.  Memory
stays O(d_in^2) regardless of sample count.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NotPositiveDefiniteError, ConfigError, ShapeError, ValidationError
from .tensor_core import as_matrix, spd_inverse

__all__ = [
    "HessianState",
    "new_state",
    "accumulate",
    "dampen",
    "invert_hessian",
    "hessian_from_rows",
]

DEFAULT_DAMP_PERCENT = 0.01


@dataclass(frozen=True)
class HessianState:
    """Accumulated ``H = X X^T`` plus sample count and dampening metadata.

    ``column_norms`` holds the per-input-dimension l2 norm of all calibration
    rows seen so far (their squares accumulate additively across batches).
    ``damp_lambda`` is the scalar actually added to the diagonal; zero until
    :func:`dampen` runs.
    """

    hessian: np.ndarray
    n_samples: int
    column_norms: np.ndarray
    damp_lambda: float = 0.0
    damp_percent: float = 0.0

    @property
    def d_in(self) -> int:
        return self.hessian.shape[0]

    def undampened_hessian(self) -> np.ndarray:
        """H with the recorded dampening removed from the diagonal."""
        if self.damp_lambda == 0.0:
            return self.hessian
        return self.hessian - self.damp_lambda * np.eye(self.d_in)


def new_state(d_in: int) -> HessianState:
    if d_in < 1:
        raise ShapeError(f"d_in must be positive, got {d_in}")
    return HessianState(
        hessian=np.zeros((d_in, d_in)),
        n_samples=0,
        column_norms=np.zeros(d_in),
    )


def accumulate(state: HessianState, batch) -> HessianState:
    """Fold a batch of calibration rows (``n_b x d_in``) into the state.

    Equivalent to concatenating all batches and accumulating once; the result
    is symmetrized after the rank-``n_b`` update so the symmetry invariant
    holds exactly regardless of batch split.
    """
    batch = as_matrix(batch, "calibration batch")
    if batch.shape[1] != state.d_in:
        raise ShapeError(
            f"calibration batch has {batch.shape[1]} columns, expected {state.d_in}"
        )
    updated = state.hessian + batch.T @ batch
    updated = (updated + updated.T) / 2.0
    sq_norms = state.column_norms**2 + np.sum(batch**2, axis=0)
    return replace(
        state,
        hessian=updated,
        n_samples=state.n_samples + batch.shape[0],
        column_norms=np.sqrt(sq_norms),
    )


def dampen(state: HessianState, percent: float) -> HessianState:
    """Add ``percent * mean(diag(H))`` to the diagonal and record it."""
    if percent < 0:
        raise ConfigError(f"dampening percent must be nonnegative, got {percent}")
    if state.n_samples < 1:
        raise ValidationError("cannot dampen an empty Hessian state (no samples accumulated)")
    lam = percent * float(np.mean(np.diag(state.hessian)))
    hessian = state.hessian.copy()
    hessian[np.diag_indices_from(hessian)] += lam
    return replace(
        state,
        hessian=hessian,
        damp_lambda=state.damp_lambda + lam,
        damp_percent=state.damp_percent + percent,
    )


def invert_hessian(state: HessianState) -> np.ndarray:
    """Return H^-1, or fail with a concrete dampening retry suggestion."""
    try:
        return spd_inverse(state.hessian)
    except NotPositiveDefiniteError as exc:
        suggestion = max(10.0 * state.damp_percent, 0.01)
        raise NotPositiveDefiniteError(
            f"Hessian is not positive definite ({exc}); "
            f"retry with dampening percent >= {suggestion}",
            suggested_damp_percent=suggestion,
        ) from exc


def hessian_from_rows(rows, damp_percent: float = 0.0) -> HessianState:
    """Build a state from one batch of calibration rows, optionally dampened."""
    rows = as_matrix(rows, "calibration rows")
    state = accumulate(new_state(rows.shape[1]), rows)
    if damp_percent > 0:
        state = dampen(state, damp_percent)
    return state
