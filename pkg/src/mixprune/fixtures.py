"""Synthetic multi-layer fixtures for benchmarks, demos, and tests.

Heterogeneity comes from the calibration inputs: layer ``l`` of ``L`` scales
its inputs by ``exp(hetero * t_l)`` with ``t_l`` evenly spaced in
[-0.5, 0.5], so ``hetero = 0`` gives near-identical layer sensitivities and
larger values spread them geometrically.  A mild mixing (one draw per
distinct width, shared by the layers that have it) keeps input covariance
non-diagonal, which is what makes second-order compensation do real work.

Two choices keep a hetero=0 fixture from leaking accidental sensitivity
differences, which inverse-proportional allocation would amplify:

* weight matrices are seeded permutations of a Gaussian quantile grid rather
  than i.i.d. draws, so every layer has the same magnitude profile;
* calibration rows are whitened to carry their target second moment exactly,
  so same-width layers see identical Hessians instead of noisy estimates.

All randomness flows from the single seed through ``numpy.random.default_rng``
(PCG64); the same seed always produces bit-identical containers.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.special import ndtri

from .errors import ConfigError

__all__ = ["gen_fixture", "write_fixture", "parse_layer_shapes", "DEFAULT_SAMPLES_PER_DIM"]

DEFAULT_SAMPLES_PER_DIM = 4
_MIXING_STRENGTH = 0.25


def _quantile_gaussian(rng, d_out: int, d_in: int) -> np.ndarray:
    """Gaussian-distributed weights with a fixed magnitude profile per size."""
    n = d_out * d_in
    grid = ndtri((np.arange(n) + 0.5) / n)
    return rng.permutation(grid).reshape(d_out, d_in)


def _exact_moment_rows(rng, n: int, scale: float, mixing: np.ndarray) -> np.ndarray:
    """Sample rows whose second moment is exactly n * scale^2 * mixing.T @ mixing."""
    d = mixing.shape[0]
    raw = rng.standard_normal((n, d))
    empirical = np.linalg.cholesky(raw.T @ raw)
    target = np.linalg.cholesky(n * scale**2 * (mixing.T @ mixing))
    # raw @ inv(empirical).T has exactly identity second moment
    return scipy.linalg.solve_triangular(empirical, raw.T, lower=True).T @ target.T


def parse_layer_shapes(text: str) -> list[tuple[int, int]]:
    """Parse a shape list like ``"8x16,16x16,16x8"`` into (d_out, d_in) pairs."""
    shapes = []
    for part in text.split(","):
        try:
            d_out, d_in = (int(v) for v in part.strip().split("x"))
        except ValueError as exc:
            raise ConfigError(f"malformed layer shape {part!r}; expected DOUTxDIN") from exc
        shapes.append((d_out, d_in))
    if not shapes:
        raise ConfigError("at least one layer shape is required")
    return shapes


def gen_fixture(
    seed: int,
    shapes: list[tuple[int, int]],
    hetero: float = 0.0,
    n_samples: int | None = None,
):
    """Generate model tensors, a manifest dict, and calibration tensors.

    ``n_samples`` defaults to ``4 * max(d_in)``, shared by every layer: the
    reconstruction error a layer accumulates grows with its sample count, so
    unequal counts would smuggle sensitivity differences into a hetero=0
    fixture.  The default is enough to make every undampened Hessian positive
    definite with probability one.

    At ``hetero = 0``, layers of equal width have near-identical
    sensitivities by construction; layers of different widths keep a small
    structural difference (their mixing covariances cannot coincide).
    """
    if hetero < 0:
        raise ConfigError(f"hetero knob must be nonnegative, got {hetero}")
    for d_out, d_in in shapes:
        if d_out < 1 or d_in < 1:
            raise ConfigError(f"layer shapes must be positive, got {d_out}x{d_in}")
    rng = np.random.default_rng(seed)
    n_layers = len(shapes)
    offsets = np.linspace(-0.5, 0.5, n_layers) if n_layers > 1 else np.zeros(1)
    n = n_samples if n_samples is not None else DEFAULT_SAMPLES_PER_DIM * max(d for _, d in shapes)
    if n <= max(d for _, d in shapes):
        raise ConfigError(f"n_samples={n} must exceed the widest layer for exact moments")

    mixings: dict[int, np.ndarray] = {}
    model: dict[str, np.ndarray] = {}
    calib: dict[str, np.ndarray] = {}
    manifest = {"layers": []}
    for i, (d_out, d_in) in enumerate(shapes):
        name = f"layer{i}"
        scale = float(np.exp(hetero * offsets[i]))
        weight = _quantile_gaussian(rng, d_out, d_in)
        if d_in not in mixings:
            mixings[d_in] = (
                np.eye(d_in)
                + _MIXING_STRENGTH * rng.standard_normal((d_in, d_in)) / np.sqrt(d_in)
            )
        inputs = _exact_moment_rows(rng, n, scale, mixings[d_in])
        model[f"{name}.weight"] = weight
        calib[f"{name}.calib"] = inputs
        manifest["layers"].append(
            {"name": name, "weight": f"{name}.weight", "calib": f"{name}.calib"}
        )
    return model, manifest, calib


def write_fixture(out_dir, model, manifest, calib) -> dict[str, str]:
    """Write model.mxpt, manifest.json, and calib.mxpt under ``out_dir``."""
    from .model_io import write_container_file

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "model": str(out / "model.mxpt"),
        "manifest": str(out / "manifest.json"),
        "calib": str(out / "calib.mxpt"),
    }
    write_container_file(paths["model"], model)
    write_container_file(paths["calib"], calib)
    Path(paths["manifest"]).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    return paths
