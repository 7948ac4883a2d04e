#!/usr/bin/env python3
"""Patch pruned weights back into the checkpoint and measure perplexity.

Reads a pruned MXPT container (as produced by the pruning engine), overwrites
the checkpoint's matching weights in memory, verifies the achieved sparsity
against the run report, and evaluates perplexity on a corpus:

    import_eval.py --pruned fx/pruned.mxpt --report fx/report.json \\
        --corpus assets/eval.txt

Nothing is patched on shape mismatch.  Output is a small JSON document with
dense and pruned perplexity plus per-layer sparsity.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import torch

import mxpt
from tinylm import eval_perplexity, load_model

HERE = Path(__file__).parent


def import_pruned(model, pruned_tensors, report=None):
    """Overwrite matching linear weights; verify sparsity against the report."""
    linears = dict(model.named_modules())
    patches = {}
    for key, tensor in pruned_tensors.items():
        if not key.endswith(".weight"):
            continue
        layer_name = key[: -len(".weight")]
        module = linears.get(layer_name)
        if module is None or not isinstance(module, torch.nn.Linear):
            raise SystemExit(f"import: container layer {layer_name!r} not in checkpoint")
        if tuple(module.weight.shape) != tensor.shape:
            raise SystemExit(
                f"import: layer {layer_name!r} shape mismatch "
                f"{tuple(module.weight.shape)} vs {tensor.shape}; aborting, nothing patched"
            )
        patches[layer_name] = tensor

    reported = {}
    if report is not None:
        reported = {row["name"]: row["achieved_sparsity"] for row in report["layers"]}

    sparsities = {}
    with torch.no_grad():
        for layer_name, tensor in patches.items():
            narrowed = torch.from_numpy(np.ascontiguousarray(tensor, dtype=np.float32))
            linears[layer_name].weight.copy_(narrowed)
            achieved = float((narrowed == 0.0).sum().item() / narrowed.numel())
            sparsities[layer_name] = achieved
            if layer_name in reported and abs(achieved - reported[layer_name]) > 1e-12:
                raise SystemExit(
                    f"import: layer {layer_name!r} sparsity {achieved} does not match "
                    f"report value {reported[layer_name]}"
                )
    return sparsities


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pruned", required=True, help="pruned MXPT container")
    parser.add_argument("--report", default=None, help="run report JSON for verification")
    parser.add_argument("--corpus", required=True, help="evaluation text file")
    parser.add_argument("--model", default=str(HERE / "assets" / "tiny_lm.pt"))
    parser.add_argument("--out", default=None, help="output JSON path (default stdout)")
    args = parser.parse_args(argv)

    torch.set_num_threads(1)
    corpus_text = Path(args.corpus).read_text("utf-8")
    if not corpus_text.strip():
        raise SystemExit("import_eval: corpus is empty")

    dense = load_model(args.model)
    dense_ppl = eval_perplexity(dense, corpus_text)

    report = json.loads(Path(args.report).read_text()) if args.report else None
    patched = load_model(args.model)
    sparsities = import_pruned(patched, mxpt.read_file(args.pruned), report)
    pruned_ppl = eval_perplexity(patched, corpus_text)

    result = {
        "dense_perplexity": dense_ppl,
        "pruned_perplexity": pruned_ppl,
        "perplexity_delta": pruned_ppl - dense_ppl,
        "layer_sparsity": sparsities,
    }
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
