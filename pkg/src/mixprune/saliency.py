"""Per-element pruning cost under pluggable criteria, and mask selection.

A saliency value estimates the reconstruction error incurred by zeroing one
weight.  Selection then prunes the smallest values, either per output row
(default: keeps per-row sparsity exact and matches the row-independent
compensation step) or over the whole layer, or in an n:m hardware pattern.

Built-in criteria:

``magnitude``
    ``w^2``; no calibration required.
``act_norm``
    ``|w| * norm(column activations)``; activation-weighted magnitude baseline.
``obs``
    ``w^2 / diag(H_inv)``; the second-order cost of removing a weight while
    optimally compensating the survivors, applied per output row with the
    shared inverse Hessian over input features.
``isc``
    Reserved slot for a refined criterion; nothing is registered under it in
    this build, so selecting it raises :class:`~mixprune.errors.ConfigError`
    until an implementation is supplied via :func:`register_criterion`.

Masks use keep = True / pruned = False, and pruning applies ``W * keep``
elementwise.  Ties are broken by lower column index first, then lower row
index, so masks never depend on construction order or thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .calibration import HessianState
from .errors import ConfigError, NumericalError, ShapeError
from .tensor_core import as_matrix

__all__ = [
    "CRITERIA",
    "SCOPES",
    "SaliencyMap",
    "SparsityMask",
    "compute_saliency",
    "register_criterion",
    "select_mask_unstructured",
    "select_mask_nm",
    "round_half_up",
]

SCOPES = ("per_row", "per_layer")


@dataclass(frozen=True)
class SaliencyMap:
    """Nonnegative per-element pruning costs with criterion provenance."""

    values: np.ndarray
    criterion: str


@dataclass(frozen=True)
class SparsityMask:
    """Boolean keep-mask (True = keep) with its exact achieved sparsity."""

    keep: np.ndarray
    achieved_sparsity: float


def round_half_up(x: float) -> int:
    """round(x) with exact .5 values going up; used for all prune counts."""
    return int(math.floor(x + 0.5))


def _criterion_magnitude(W, state, H_inv):
    return W**2


def _criterion_act_norm(W, state, H_inv):
    if state is None:
        raise ConfigError("criterion 'act_norm' requires a Hessian state (column norms)")
    return np.abs(W) * state.column_norms[np.newaxis, :]


def _criterion_obs(W, state, H_inv):
    if H_inv is None:
        raise ConfigError("criterion 'obs' requires the inverse Hessian")
    diag = np.diag(H_inv)
    bad = np.nonzero(diag <= 0)[0]
    if bad.size:
        raise NumericalError(
            f"inverse Hessian has nonpositive diagonal at column {int(bad[0])}"
        )
    return W**2 / diag[np.newaxis, :]


def _criterion_isc_placeholder(W, state, H_inv):
    raise ConfigError(
        "criterion 'isc' is a reserved slot with no registered implementation; "
        "provide one with register_criterion('isc', fn)"
    )


_CRITERIA: dict[str, Callable] = {
    "magnitude": _criterion_magnitude,
    "act_norm": _criterion_act_norm,
    "obs": _criterion_obs,
    "isc": _criterion_isc_placeholder,
}

CRITERIA = tuple(_CRITERIA)


def register_criterion(tag: str, fn: Callable) -> None:
    """Register or replace a saliency criterion.

    ``fn(W, state, H_inv) -> values`` must return a nonnegative array shaped
    like ``W``.  Mask selection and reconstruction are criterion-agnostic, so
    a new criterion drops in without touching either.
    """
    _CRITERIA[tag] = fn


def compute_saliency(
    W,
    state: Optional[HessianState] = None,
    H_inv: Optional[np.ndarray] = None,
    criterion: str = "obs",
) -> SaliencyMap:
    """Evaluate a criterion over a weight matrix."""
    W = as_matrix(W, "W")
    if criterion not in _CRITERIA:
        raise ConfigError(
            f"unknown criterion {criterion!r}; expected one of {sorted(_CRITERIA)}"
        )
    if H_inv is not None and H_inv.shape != (W.shape[1], W.shape[1]):
        raise ShapeError(
            f"H_inv shape {H_inv.shape} does not match d_in={W.shape[1]}"
        )
    values = _CRITERIA[criterion](W, state, H_inv)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != W.shape:
        raise ShapeError(
            f"criterion {criterion!r} returned shape {values.shape}, expected {W.shape}"
        )
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise NumericalError(f"criterion {criterion!r} produced non-finite or negative costs")
    return SaliencyMap(values=values, criterion=criterion)


def _mask_from_keep(keep: np.ndarray) -> SparsityMask:
    pruned = int(keep.size - np.count_nonzero(keep))
    return SparsityMask(keep=keep, achieved_sparsity=pruned / keep.size)


def _ascending_order(values: np.ndarray, cols: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # lexsort: last key is primary => value, then column, then row
    return np.lexsort((rows, cols, values))


def select_mask_unstructured(s: SaliencyMap, p: float, scope: str = "per_row") -> SparsityMask:
    """Prune the lowest-saliency round(p*N) elements per row or per layer."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"sparsity must be in [0, 1], got {p}")
    if scope not in SCOPES:
        raise ConfigError(f"unknown scope {scope!r}; expected one of {SCOPES}")
    values = s.values
    d_out, d_in = values.shape
    keep = np.ones((d_out, d_in), dtype=bool)
    if scope == "per_row":
        k = round_half_up(p * d_in)
        if k > 0:
            cols = np.arange(d_in)
            for r in range(d_out):
                order = np.lexsort((cols, values[r]))
                keep[r, order[:k]] = False
    else:
        n_total = d_out * d_in
        k = round_half_up(p * n_total)
        if k > 0:
            rows, cols = np.divmod(np.arange(n_total), d_in)
            order = _ascending_order(values.ravel(), cols, rows)
            keep.ravel()[order[:k]] = False
    return _mask_from_keep(keep)


def select_mask_nm(s: SaliencyMap, n: int, m: int) -> SparsityMask:
    """Within every contiguous group of m columns, prune the n lowest costs."""
    if not (0 <= n < m):
        raise ConfigError(f"n:m pattern requires 0 <= n < m, got {n}:{m}")
    values = s.values
    d_out, d_in = values.shape
    if d_in % m != 0:
        raise ConfigError(f"d_in={d_in} is not divisible by the n:m group size m={m}")
    keep = np.ones((d_out, d_in), dtype=bool)
    if n > 0:
        grouped = values.reshape(d_out, d_in // m, m)
        # stable sort within each group: ties go to the lower column index
        order = np.argsort(grouped, axis=2, kind="stable")
        prune_local = order[:, :, :n]
        group_base = np.arange(0, d_in, m)[np.newaxis, :, np.newaxis]
        prune_cols = (prune_local + group_base).reshape(d_out, -1)
        rows = np.repeat(np.arange(d_out), prune_cols.shape[1])
        keep[rows, prune_cols.ravel()] = False
    return _mask_from_keep(keep)
