"""Per-layer sensitivity scores and global-to-per-layer sparsity allocation.

A layer's sensitivity is the estimated pruning cost per parameter at a probe
sparsity: the sum of its smallest ``round(probe * N)`` saliency values divided
by ``N``.  Cheap layers (low score) can absorb more sparsity than sensitive
ones, so the default allocation makes per-layer sparsity inversely
proportional to ``score + tau`` and rescales so the parameter-weighted mean
meets the global target, clipping to ``[p_min, p_max]`` with the residual
budget redistributed over unclipped layers (water-filling).

``tau`` is relative (``1e-12 * max(score)``) so that scaling every score by a
positive constant leaves the plan unchanged.

Allocators are pluggable: ``uniform`` and ``inverse`` are built in, and the
tag ``paper`` is reserved for a refined sensitivity-to-sparsity mapping; until
one is registered it raises :class:`~mixprune.errors.ConfigError`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BudgetError, ConfigError, ValidationError
from .saliency import SaliencyMap, round_half_up
from .tensor_core import as_matrix

__all__ = [
    "ALLOCATORS",
    "LayerSensitivity",
    "SparsityPlan",
    "layer_sensitivity",
    "allocate_sparsity",
    "plan_uniform",
    "default_clip_bounds",
]

ALLOCATORS = ("uniform", "inverse", "paper")

_TAU_RELATIVE = 1e-12
_BUDGET_ATOL = 1e-3


@dataclass(frozen=True)
class LayerSensitivity:
    """Estimated pruning cost per parameter for one layer."""

    name: str
    score: float
    param_count: int


@dataclass(frozen=True)
class SparsityPlan:
    """Global target plus the per-layer ratios and inputs that produced them."""

    global_target: float
    per_layer: dict[str, float]
    p_min: float
    p_max: float
    sensitivities: tuple[LayerSensitivity, ...]

    def weighted_mean(self) -> float:
        total = sum(s.param_count for s in self.sensitivities)
        if total == 0:
            return self.global_target
        return (
            sum(self.per_layer[s.name] * s.param_count for s in self.sensitivities) / total
        )


def layer_sensitivity(name: str, W, s: SaliencyMap, probe: float) -> LayerSensitivity:
    """Score one layer: mean cost of its cheapest ``round(probe * N)`` weights."""
    if not 0.0 < probe <= 1.0:
        raise ConfigError(f"probe sparsity must be in (0, 1], got {probe}")
    W = as_matrix(W, "W")
    if s.values.shape != W.shape:
        raise ConfigError(
            f"saliency shape {s.values.shape} does not match weights {W.shape}"
        )
    n_params = W.size
    k = round_half_up(probe * n_params)
    cheapest = np.sort(s.values.ravel())[:k]
    return LayerSensitivity(
        name=name,
        score=float(cheapest.sum()) / n_params,
        param_count=n_params,
    )


def default_clip_bounds(target: float) -> tuple[float, float]:
    """Default per-layer clip bounds: no layer fully spared or destroyed."""
    return max(0.0, 0.1 * target), min(0.9, 2.0 * target)


def _clipped_mean(c: float, inv_scores: np.ndarray, weights: np.ndarray,
                  p_min: float, p_max: float) -> float:
    p = np.clip(c * inv_scores, p_min, p_max)
    return float(np.dot(p, weights))


def allocate_sparsity(
    sensitivities: Sequence[LayerSensitivity],
    target: float,
    p_min: float | None = None,
    p_max: float | None = None,
) -> SparsityPlan:
    """Turn sensitivity scores into per-layer sparsities meeting the budget.

    The parameter-weighted mean of the clipped inverse-proportional map

        p_l = clip(c / (score_l + tau), p_min, p_max)

    is continuous and non-decreasing in ``c``, sweeping from ``p_min`` to
    ``p_max``, so the scale ``c`` meeting the budget exists whenever
    ``p_min <= target <= p_max`` and is found by bisection; this lands on the
    same fixpoint as iterative clip-and-redistribute water-filling without its
    ordering pitfalls.
    """
    if not sensitivities:
        raise ConfigError("allocate_sparsity requires at least one layer")
    if not 0.0 <= target <= 1.0:
        raise ConfigError(f"global sparsity target must be in [0, 1], got {target}")
    if p_min is None or p_max is None:
        d_min, d_max = default_clip_bounds(target)
        p_min = d_min if p_min is None else p_min
        p_max = d_max if p_max is None else p_max
    if not 0.0 <= p_min <= p_max <= 1.0:
        raise ConfigError(f"clip bounds must satisfy 0 <= p_min <= p_max <= 1, got [{p_min}, {p_max}]")
    if target < p_min:
        raise BudgetError(
            f"target sparsity {target} is below the binding lower clip p_min={p_min}"
        )
    if target > p_max:
        raise BudgetError(
            f"target sparsity {target} exceeds the binding upper clip p_max={p_max}"
        )

    scores = np.array([s.score for s in sensitivities], dtype=np.float64)
    counts = np.array([s.param_count for s in sensitivities], dtype=np.float64)
    if not np.all(np.isfinite(scores)) or np.any(scores < 0):
        raise ValidationError("sensitivity scores must be finite and nonnegative")
    if np.any(counts <= 0):
        raise ValidationError("parameter counts must be positive")

    if np.all(scores == scores[0]):
        per_layer = {s.name: target for s in sensitivities}
        return SparsityPlan(target, per_layer, p_min, p_max, tuple(sensitivities))

    tau = _TAU_RELATIVE * float(scores.max())
    inv_scores = 1.0 / (scores + tau)
    weights = counts / counts.sum()

    lo, hi = 0.0, p_max / inv_scores.min()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _clipped_mean(mid, inv_scores, weights, p_min, p_max) < target:
            lo = mid
        else:
            hi = mid
    c = hi
    ratios = np.clip(c * inv_scores, p_min, p_max)

    achieved = float(np.dot(ratios, weights))
    if abs(achieved - target) > _BUDGET_ATOL:
        bound = "p_min" if achieved > target else "p_max"
        raise BudgetError(
            f"cannot meet target {target}: all layers clipped, achieved {achieved:.6f} "
            f"(binding bound: {bound})"
        )
    per_layer = {s.name: float(r) for s, r in zip(sensitivities, ratios)}
    return SparsityPlan(target, per_layer, p_min, p_max, tuple(sensitivities))


def plan_uniform(sensitivities: Sequence[LayerSensitivity], target: float) -> SparsityPlan:
    """Every layer at the global target; the mixed-vs-uniform baseline."""
    if not 0.0 <= target <= 1.0:
        raise ConfigError(f"global sparsity target must be in [0, 1], got {target}")
    per_layer = {s.name: target for s in sensitivities}
    return SparsityPlan(target, per_layer, target, target, tuple(sensitivities))
