"""End-to-end orchestration: calibrate, allocate, prune, report.

For each manifest layer the pipeline accumulates the Hessian from that
layer's recorded calibration rows, dampens and inverts it, scores saliency,
applies the sparsity plan, reconstructs the survivors, and records a report
row.  Layers are pruned independently against dense-model activations; report
rows follow manifest order regardless of completion order.

Layers share nothing, so they may be processed concurrently; the
``MIXPRUNE_THREADS`` environment variable caps the worker count (absent means
auto).  Results are identical for any worker count.

The report JSON is the single source of truth for downstream checks and is
versioned (``"report_version": 1``).  Serialization is canonical (sorted
keys), so two identical runs differ only in wall-time fields.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import allocator as alloc
from .calibration import HessianState, accumulate, dampen, invert_hessian, new_state
from .errors import ConfigError, MixpruneError, ValidationError, add_layer_context
from .model_io import LayerSpec, ResolvedLayer, validate_manifest
from .pruner import (
    PrunedLayer,
    prune_blocked,
    prune_iterative_obs,
    prune_only,
    reconstruct_closed_form,
)
from .saliency import (
    CRITERIA,
    SCOPES,
    SaliencyMap,
    compute_saliency,
    select_mask_nm,
    select_mask_unstructured,
)

__all__ = ["PruneConfig", "REPORT_VERSION", "run_pipeline", "eval_model", "worker_count"]

REPORT_VERSION = 1

METHODS = ("closed_form", "iterative_obs", "prune_only", "blocked")
DEFAULT_BLOCK = 128


@dataclass
class PruneConfig:
    """Everything that determines a pruning run; serializes canonically."""

    sparsity: float = 0.5
    criterion: str = "obs"
    allocator: str = "inverse"
    scope: str = "per_row"
    damp_percent: float = 0.01
    method: str = "closed_form"
    block: int | None = None
    nm: tuple[int, int] | None = None
    p_min: float | None = None
    p_max: float | None = None
    sensitivity_probe: float | None = None
    seed: int = 0

    def validate(self) -> "PruneConfig":
        if not 0.0 <= self.sparsity <= 1.0:
            raise ConfigError(f"sparsity must be in [0, 1], got {self.sparsity}")
        if self.criterion not in CRITERIA:
            raise ConfigError(f"unknown criterion {self.criterion!r}")
        if self.allocator not in alloc.ALLOCATORS:
            raise ConfigError(f"unknown allocator {self.allocator!r}")
        if self.scope not in SCOPES:
            raise ConfigError(f"unknown scope {self.scope!r}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.damp_percent < 0:
            raise ConfigError(f"dampening percent must be nonnegative, got {self.damp_percent}")
        if self.block is not None and self.block < 1:
            raise ConfigError(f"block width must be >= 1, got {self.block}")
        if self.block is not None and self.method != "blocked":
            raise ConfigError("block width is only meaningful with method='blocked'")
        if self.nm is not None:
            n, m = self.nm
            if not 0 <= n < m:
                raise ConfigError(f"n:m pattern requires 0 <= n < m, got {n}:{m}")
            if self.method == "blocked" or self.block is not None:
                raise ConfigError("n:m selection cannot be combined with blocked pruning")
        return self

    def to_dict(self) -> dict:
        return {
            "sparsity": self.sparsity,
            "criterion": self.criterion,
            "allocator": self.allocator,
            "scope": self.scope,
            "damp_percent": self.damp_percent,
            "method": self.method,
            "block": self.block,
            "nm": list(self.nm) if self.nm is not None else None,
            "p_min": self.p_min,
            "p_max": self.p_max,
            "sensitivity_probe": self.sensitivity_probe,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: Mapping) -> "PruneConfig":
        kwargs = dict(doc)
        if kwargs.get("nm") is not None:
            kwargs["nm"] = tuple(kwargs["nm"])
        return cls(**kwargs).validate()


def worker_count() -> int:
    """Worker cap from MIXPRUNE_THREADS; absence means auto."""
    raw = os.environ.get("MIXPRUNE_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ConfigError(f"MIXPRUNE_THREADS must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ConfigError(f"MIXPRUNE_THREADS must be >= 1, got {n}")
        return n
    return min(8, os.cpu_count() or 1)


def _map_layers(fn, items):
    """Apply fn over layers, in parallel when allowed; results keep order."""
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class _LayerWork:
    resolved: ResolvedLayer
    weight: np.ndarray
    state: HessianState | None = None
    h_inv: np.ndarray | None = None
    saliency: SaliencyMap | None = None
    sensitivity: alloc.LayerSensitivity | None = None
    result: PrunedLayer | None = None
    seconds: float = 0.0


def _merge_tensors(model: Mapping[str, np.ndarray], calib: Mapping[str, np.ndarray]) -> dict:
    overlap = set(model) & set(calib)
    if overlap:
        raise ValidationError(
            f"model and calibration containers share tensor names: {sorted(overlap)}"
        )
    return {**model, **calib}


def run_pipeline(
    config: PruneConfig,
    model_tensors: Mapping[str, np.ndarray],
    manifest: list[LayerSpec],
    calib_tensors: Mapping[str, np.ndarray],
):
    """Prune every manifest layer; return (pruned tensors, report dict)."""
    config.validate()
    started = time.perf_counter()
    resolved = validate_manifest(manifest, _merge_tensors(model_tensors, calib_tensors))
    if not resolved:
        raise ValidationError("manifest contains no layers")

    probe = config.sensitivity_probe
    if probe is None:
        probe = config.sparsity if config.sparsity > 0 else 1.0

    def calibrate(layer: ResolvedLayer) -> _LayerWork:
        t0 = time.perf_counter()
        work = _LayerWork(resolved=layer, weight=np.asarray(model_tensors[layer.weight]))
        try:
            state = accumulate(new_state(layer.d_in), calib_tensors[layer.calib])
            if config.damp_percent > 0:
                state = dampen(state, config.damp_percent)
            work.state = state
            work.h_inv = invert_hessian(state)
            work.saliency = compute_saliency(
                work.weight, state=state, H_inv=work.h_inv, criterion=config.criterion
            )
            work.sensitivity = alloc.layer_sensitivity(
                layer.name, work.weight, work.saliency, probe
            )
        except MixpruneError as exc:
            raise add_layer_context(exc, layer.name)
        work.seconds = time.perf_counter() - t0
        return work

    works = _map_layers(calibrate, resolved)

    sensitivities = [w.sensitivity for w in works]
    if config.allocator == "uniform":
        plan = alloc.plan_uniform(sensitivities, config.sparsity)
    elif config.allocator == "inverse":
        plan = alloc.allocate_sparsity(
            sensitivities, config.sparsity, p_min=config.p_min, p_max=config.p_max
        )
    else:
        raise ConfigError(
            "allocator 'paper' is a reserved slot with no registered mapping in this build; "
            "use 'inverse' or 'uniform'"
        )

    def reconstruct(work: _LayerWork) -> _LayerWork:
        t0 = time.perf_counter()
        name = work.resolved.name
        p_layer = plan.per_layer[name]
        try:
            if config.nm is not None:
                mask = select_mask_nm(work.saliency, config.nm[0], config.nm[1])
                work.result = _apply_masked_method(config.method, work, mask)
            elif config.method == "blocked":
                work.result = prune_blocked(
                    work.weight,
                    p_layer,
                    config.criterion,
                    work.state,
                    config.block or DEFAULT_BLOCK,
                )
            else:
                mask = select_mask_unstructured(work.saliency, p_layer, config.scope)
                work.result = _apply_masked_method(config.method, work, mask)
        except MixpruneError as exc:
            raise add_layer_context(exc, name)
        work.seconds += time.perf_counter() - t0
        return work

    works = _map_layers(reconstruct, works)

    out_tensors: dict[str, np.ndarray] = {}
    rows = []
    total_params = 0
    total_pruned = 0
    total_error = 0.0
    for work in works:
        layer = work.resolved
        out_tensors[layer.weight] = work.result.weights
        if layer.bias is not None:
            out_tensors[layer.bias] = np.asarray(model_tensors[layer.bias])
        n_params = layer.d_out * layer.d_in
        n_pruned = int(work.result.mask.keep.size - np.count_nonzero(work.result.mask.keep))
        total_params += n_params
        total_pruned += n_pruned
        total_error += work.result.recon_error
        rows.append(
            {
                "name": layer.name,
                "p_target": plan.per_layer[layer.name] if config.nm is None
                else config.nm[0] / config.nm[1],
                "achieved_sparsity": work.result.mask.achieved_sparsity,
                "recon_error": work.result.recon_error,
                "criterion": config.criterion,
                "method": work.result.method,
                "sensitivity_score": work.sensitivity.score,
                "param_count": n_params,
                "wall_time_s": work.seconds,
            }
        )

    report = {
        "report_version": REPORT_VERSION,
        "config": config.to_dict(),
        "allocation": {
            "allocator": config.allocator,
            "global_target": plan.global_target,
            "p_min": plan.p_min,
            "p_max": plan.p_max,
            "per_layer": dict(sorted(plan.per_layer.items())),
        },
        "layers": rows,
        "global": {
            "n_layers": len(rows),
            "parameter_weighted_sparsity": total_pruned / total_params,
            "total_recon_error": total_error,
            "wall_time_s": time.perf_counter() - started,
        },
    }
    return out_tensors, report


def _apply_masked_method(method: str, work: _LayerWork, mask) -> PrunedLayer:
    if method == "closed_form":
        return reconstruct_closed_form(work.weight, mask, work.state)
    if method == "iterative_obs":
        return prune_iterative_obs(work.weight, mask, work.state)
    if method == "prune_only":
        return prune_only(work.weight, mask, work.state)
    raise ConfigError(f"method {method!r} requires blocked dispatch")


def eval_model(
    tensors_a: Mapping[str, np.ndarray],
    tensors_b: Mapping[str, np.ndarray],
    manifest: list[LayerSpec],
    calib_tensors: Mapping[str, np.ndarray],
) -> dict:
    """Per-layer output error ``||W_a X - W_b X||_F^2`` straight from activations.

    Independent of the Hessian path on purpose: this is the cross-check for
    the trace-form reconstruction errors in the report.
    """
    resolved_a = validate_manifest(manifest, _merge_tensors(tensors_a, calib_tensors))
    validate_manifest(manifest, _merge_tensors(tensors_b, calib_tensors))
    rows = []
    total = 0.0
    for layer in resolved_a:
        wa = np.asarray(tensors_a[layer.weight], dtype=np.float64)
        wb = np.asarray(tensors_b[layer.weight], dtype=np.float64)
        if wa.shape != wb.shape:
            raise ValidationError(
                f"layer '{layer.name}': weight shapes differ between containers "
                f"({wa.shape} vs {wb.shape})"
            )
        x_rows = np.asarray(calib_tensors[layer.calib], dtype=np.float64)
        diff = (wa - wb) @ x_rows.T
        err = float(np.sum(diff * diff))
        rows.append({"name": layer.name, "output_error": err})
        total += err
    return {"layers": rows, "total_output_error": total}
