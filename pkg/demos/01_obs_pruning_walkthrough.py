#!/usr/bin/env python3
"""Walk through second-order pruning on a layer small enough to check by hand.

The running example: one output row W = [[1, 2]] calibrated with two input
samples, rows [1, 0] and [1, 1].  Accumulating them gives the Hessian

    H = X X^T = [[2, 1], [1, 1]],   H^-1 = [[1, -1], [-1, 2]]

and the per-weight cost of removal (weight^2 over the inverse diagonal)
ranks column 0 as the cheaper one to prune.  Compensating the survivor turns
[[1, 2]] into [[0, 3]]: the kept weight absorbs the pruned one's correlated
share, and the output error lands on exactly 1.0 instead of the 2.0 that
bare zeroing would cost.
"""

import numpy as np

from mixprune import (
    PruneConfig,
    compute_saliency,
    hessian_from_rows,
    invert_hessian,
    prune_iterative_obs,
    prune_only,
    reconstruct_closed_form,
    select_mask_unstructured,
)

np.set_printoptions(precision=4, suppress=True)

weight = np.array([[1.0, 2.0]])
calib_rows = np.array([[1.0, 0.0], [1.0, 1.0]])

print("dense weights:      ", weight)
print("calibration rows:   ", calib_rows.tolist())

state = hessian_from_rows(calib_rows)
print("\nHessian H = X X^T:\n", state.hessian)
h_inv = invert_hessian(state)
print("inverse Hessian:\n", h_inv)

saliency = compute_saliency(weight, state=state, H_inv=h_inv, criterion="obs")
print("\nremoval costs w^2 / diag(H^-1):", saliency.values)

mask = select_mask_unstructured(saliency, p=0.5)
print("keep mask at 50% sparsity:     ", mask.keep)

closed = reconstruct_closed_form(weight, mask, state)
plain = prune_only(weight, mask, state)
iterative = prune_iterative_obs(weight, mask, state)

print("\nprune only:         ", plain.weights, " error", round(plain.recon_error, 6))
print("closed-form update: ", closed.weights, " error", round(closed.recon_error, 6))
print("sequential update:  ", iterative.weights, " error", round(iterative.recon_error, 6))

print("\nThe two compensation routes agree; both beat bare zeroing.")

# The same numbers fall out of the full pipeline driven by a config object.
from mixprune import load_manifest, run_pipeline

model = {"lin.weight": weight}
calib = {"lin.calib": calib_rows}
manifest = load_manifest({"layers": [{"name": "lin", "weight": "lin.weight", "calib": "lin.calib"}]})
pruned, report = run_pipeline(
    PruneConfig(sparsity=0.5, criterion="obs", damp_percent=0.0), model, manifest, calib
)
print("\npipeline output weights:", pruned["lin.weight"])
print("pipeline report error:  ", round(report["layers"][0]["recon_error"], 6))
