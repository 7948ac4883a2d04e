"""Weight removal with second-order compensation of the survivors.

Given a keep-mask for one linear layer, the survivors are adjusted to minimize
the layer reconstruction error ``||W X - W_hat X||_F^2``.  Three routes exist:

``reconstruct_closed_form``
    Per output row, solves the normal equations restricted to the kept
    columns.  This is the exact minimizer for the given mask and serves as
    the oracle the other routes are validated against.

``prune_iterative_obs``
    Eliminates pruned columns one at a time.  Removing column ``c`` from row
    ``w`` applies the rank-one compensation

        delta_w = -(w_c / Hinv[c, c]) * Hinv[:, c]

    and then downdates the inverse Hessian so later eliminations see the
    shrunken problem.  With exact arithmetic the final weights equal the
    closed-form solution.

``prune_blocked``
    Processes columns left to right in blocks: the block's share of the prune
    budget is selected by saliency on entry, and each elimination compensates
    only columns to its right.  An approximation that scales to wide layers.

The Hessian here is d_in x d_in over input features; saliency and updates
index columns within each output row.  Rows are independent given the shared
inverse Hessian, so per-row work may run in parallel; each row downdates a
private copy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import HessianState, invert_hessian
from .errors import ConfigError, NotPositiveDefiniteError, NumericalError, ShapeError
from .saliency import SparsityMask, round_half_up, _mask_from_keep
from .tensor_core import as_matrix, cholesky, solve_spd

__all__ = [
    "PrunedLayer",
    "PIVOT_TOLERANCE",
    "prune_only",
    "reconstruct_closed_form",
    "prune_iterative_obs",
    "obs_downdate",
    "prune_blocked",
    "layer_recon_error",
]

PIVOT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PrunedLayer:
    """Pruned weights (exact zeros at mask-false positions) plus bookkeeping."""

    weights: np.ndarray
    mask: SparsityMask
    recon_error: float
    method: str


def layer_recon_error(W, W_hat, state: HessianState) -> float:
    """Reconstruction error ``trace((W - W_hat) H (W - W_hat)^T)``.

    Evaluated with the undampened Hessian recovered from the state, so the
    value equals ``||W X - W_hat X||_F^2`` computed directly from activations.
    """
    W = as_matrix(W, "W")
    W_hat = as_matrix(W_hat, "W_hat")
    if W.shape != W_hat.shape:
        raise ShapeError(f"weight shapes differ: {W.shape} vs {W_hat.shape}")
    delta = W - W_hat
    value = float(np.sum((delta @ state.undampened_hessian()) * delta))
    return max(value, 0.0)


def _check_layer_shapes(W: np.ndarray, mask: SparsityMask, state: HessianState) -> None:
    if mask.keep.shape != W.shape:
        raise ShapeError(f"mask shape {mask.keep.shape} does not match weights {W.shape}")
    if state.d_in != W.shape[1]:
        raise ShapeError(f"Hessian is {state.d_in}x{state.d_in}, expected d_in={W.shape[1]}")


def prune_only(W, mask: SparsityMask, state: HessianState) -> PrunedLayer:
    """Zero the pruned positions without compensating the survivors."""
    W = as_matrix(W, "W")
    _check_layer_shapes(W, mask, state)
    pruned = np.where(mask.keep, W, 0.0)
    return PrunedLayer(
        weights=pruned,
        mask=mask,
        recon_error=layer_recon_error(W, pruned, state),
        method="prune_only",
    )


def reconstruct_closed_form(W, mask: SparsityMask, state: HessianState) -> PrunedLayer:
    """Exact least-squares reconstruction of the kept weights, row by row.

    For row ``r`` with kept column set K, solves
    ``H[K, K] w_hat_K = H[K, :] w_r`` so the pruned row's outputs match the
    dense row's outputs as closely as the kept support allows.
    """
    W = as_matrix(W, "W")
    _check_layer_shapes(W, mask, state)
    H = state.hessian
    out = np.zeros_like(W)
    for r in range(W.shape[0]):
        kept = np.nonzero(mask.keep[r])[0]
        if kept.size == 0:
            continue
        if kept.size == W.shape[1]:
            out[r] = W[r]  # nothing pruned: the dense row is already optimal
            continue
        rhs = (H[kept, :] @ W[r])[:, np.newaxis]
        try:
            solution = solve_spd(H[np.ix_(kept, kept)], rhs)
        except NotPositiveDefiniteError as exc:
            raise NumericalError(
                f"row {r}: kept submatrix is singular ({exc}); increase dampening"
            ) from exc
        out[r, kept] = solution[:, 0]
    return PrunedLayer(
        weights=out,
        mask=mask,
        recon_error=layer_recon_error(W, out, state),
        method="closed_form",
    )


def obs_downdate(H_inv: np.ndarray, c: int) -> np.ndarray:
    """Remove column ``c`` from an inverse Hessian, freezing its index.

    Returns ``H_inv - outer(H_inv[:, c], H_inv[c, :]) / H_inv[c, c]`` with row
    and column ``c`` then pinned to identity, so column indices stay stable
    across a row's elimination sequence.
    """
    pivot = H_inv[c, c]
    if pivot <= 0:
        raise NumericalError(f"downdate pivot at column {c} is nonpositive ({pivot})")
    out = H_inv - np.outer(H_inv[:, c], H_inv[c, :]) / pivot
    out[c, :] = 0.0
    out[:, c] = 0.0
    out[c, c] = 1.0
    return out


def _eliminate(w: np.ndarray, H_inv: np.ndarray, c: int) -> np.ndarray:
    """Apply the rank-one compensation for removing column ``c`` from row ``w``.

    The pruned entry itself is zeroed exactly.  Returns the downdated inverse.
    """
    pivot = H_inv[c, c]
    if pivot <= PIVOT_TOLERANCE:
        raise NumericalError(
            f"inverse Hessian pivot at column {c} is below tolerance ({pivot:.3e})"
        )
    w += -(w[c] / pivot) * H_inv[:, c]
    w[c] = 0.0
    return obs_downdate(H_inv, c)


def prune_iterative_obs(W, mask: SparsityMask, state: HessianState) -> PrunedLayer:
    """Sequential per-element elimination with inverse-Hessian downdates.

    Each row's pruned columns are eliminated in ascending order of their
    initial saliency (ties to the lower column index), which fixes the
    rounding path and makes runs reproducible.  The result must agree with
    :func:`reconstruct_closed_form` up to floating-point error.
    """
    W = as_matrix(W, "W")
    _check_layer_shapes(W, mask, state)
    H_inv_base = invert_hessian(state)
    base_diag = np.diag(H_inv_base)
    out = W.copy()
    for r in range(W.shape[0]):
        pruned_cols = np.nonzero(~mask.keep[r])[0]
        if pruned_cols.size == 0:
            continue
        initial_cost = W[r, pruned_cols] ** 2 / base_diag[pruned_cols]
        order = pruned_cols[np.lexsort((pruned_cols, initial_cost))]
        w = out[r]
        H_inv = H_inv_base.copy()
        for c in order:
            H_inv = _eliminate(w, H_inv, int(c))
    return PrunedLayer(
        weights=out,
        mask=mask,
        recon_error=layer_recon_error(W, out, state),
        method="iterative_obs",
    )


def prune_blocked(
    W,
    p: float,
    criterion: str,
    state: HessianState,
    block: int,
) -> PrunedLayer:
    """Blocked left-to-right pruning with rightward-only compensation.

    Columns are finalized strictly left to right: once passed, a column (kept
    or pruned) leaves the free set, so compensation for pruning column ``c``
    can only move columns to its right.  With ``R`` the upper Cholesky factor
    of the inverse Hessian (``H_inv = R.T @ R``), the inverse of the shrinking
    free-set problem is ``R[c:, :].T @ R[c:, :]``, which makes the optimal
    rightward update simply

        w[c:] -= (w[c] / R[c, c]) * R[c, c:]

    Block masks are selected on entry from the current weights and the
    free-set inverse diagonal: the not-yet-finalized tail is ranked by current
    cost and the block prunes its intersection with the cheapest
    ``budget_left`` columns.  The remaining budget always fits in the
    remaining tail, so every row lands on exactly ``round(p * d_in)`` pruned
    columns, and with ``block = d_in`` the mask equals one-shot selection.

    Costs are evaluated incrementally, so only the built-in criteria
    (magnitude, act_norm, obs) are supported here; registered custom criteria
    remain available through the mask-based methods.
    """
    W = as_matrix(W, "W")
    if block < 1:
        raise ConfigError(f"block width must be >= 1, got {block}")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"sparsity must be in [0, 1], got {p}")
    if criterion not in ("magnitude", "act_norm", "obs"):
        raise ConfigError(
            f"blocked pruning supports built-in criteria only, got {criterion!r}"
        )
    if state.d_in != W.shape[1]:
        raise ShapeError(f"Hessian is {state.d_in}x{state.d_in}, expected d_in={W.shape[1]}")
    d_out, d_in = W.shape
    H_inv = invert_hessian(state)
    try:
        factor = cholesky(H_inv)
    except NotPositiveDefiniteError as exc:
        raise NumericalError(
            f"inverse Hessian is numerically indefinite ({exc}); increase dampening"
        ) from exc
    upper = factor.L.T
    # cumulative squares down each column: free-set diag at block start s is
    # sq_csum[c, c] - sq_csum[s - 1, c]
    sq_csum = np.cumsum(upper**2, axis=0)

    out = W.copy()
    keep = np.ones((d_out, d_in), dtype=bool)
    k_total = round_half_up(p * d_in)
    all_cols = np.arange(d_in)
    for r in range(d_out):
        w = out[r]
        budget_left = k_total
        for start in range(0, d_in, block):
            if budget_left <= 0:
                break
            end = min(start + block, d_in)
            tail = all_cols[start:]
            costs = _block_costs(w, tail, start, sq_csum, state, criterion)
            winners = tail[np.lexsort((tail, costs))[:budget_left]]
            chosen = winners[winners < end]
            for c in np.sort(chosen):
                pivot = upper[c, c] ** 2
                if pivot <= PIVOT_TOLERANCE:
                    raise NumericalError(
                        f"free-set pivot at column {c} is below tolerance ({pivot:.3e})"
                    )
                w[c:] -= (w[c] / upper[c, c]) * upper[c, c:]
                w[c] = 0.0
                keep[r, c] = False
            budget_left -= len(chosen)
    mask = _mask_from_keep(keep)
    return PrunedLayer(
        weights=out,
        mask=mask,
        recon_error=layer_recon_error(W, out, state),
        method="blocked",
    )


def _block_costs(
    w: np.ndarray,
    cols: np.ndarray,
    start: int,
    sq_csum: np.ndarray,
    state: HessianState,
    criterion: str,
) -> np.ndarray:
    """Criterion costs for one row over the given not-yet-finalized columns."""
    if criterion == "magnitude":
        return w[cols] ** 2
    if criterion == "act_norm":
        return np.abs(w[cols]) * state.column_norms[cols]
    diag = sq_csum[cols, cols]
    if start > 0:
        diag = diag - sq_csum[start - 1, cols]
    bad = np.nonzero(diag <= 0)[0]
    if bad.size:
        raise NumericalError(
            f"free-set inverse diagonal is nonpositive at column {int(cols[bad[0]])}"
        )
    return w[cols] ** 2 / diag
