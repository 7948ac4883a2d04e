#!/usr/bin/env python3
"""Record a checkpoint's linear layers and their calibration activations.

Each target layer gets a forward hook that captures its INPUT rows (the
activations the weight multiplies) while the calibration text streams
through.  Weights, optional biases, and activations are then written as MXPT
containers with a matching manifest, ready for the pruning engine:

    export.py --model assets/tiny_lm.pt --layers "fc*,head" --samples 512 \\
        --corpus assets/corpus.txt --out-dir exported/

Unresolvable layer patterns are listed and the export aborts before any
file is written.
"""

import argparse
import fnmatch
import json
import sys
from pathlib import Path

import numpy as np
import torch

import mxpt
from tinylm import load_model, encode, windows

HERE = Path(__file__).parent


def resolve_layers(model, patterns):
    """Match comma-separated glob patterns against named Linear modules."""
    linears = {
        name: module
        for name, module in model.named_modules()
        if isinstance(module, torch.nn.Linear)
    }
    selected = {}
    misses = []
    for pattern in patterns.split(","):
        pattern = pattern.strip()
        hits = {n: m for n, m in linears.items() if fnmatch.fnmatch(n, pattern)}
        if not hits:
            misses.append(pattern)
        selected.update(hits)
    if misses:
        raise SystemExit(
            f"export: patterns matched no linear layers: {misses}; "
            f"available: {sorted(linears)}"
        )
    return dict(sorted(selected.items()))


@torch.no_grad()
def capture_activations(model, layers, corpus_text, n_samples):
    """Run calibration windows through the model, recording layer inputs."""
    captured = {name: [] for name in layers}
    hooks = []
    for name, module in layers.items():
        def grab(module, inputs, output, _name=name):
            captured[_name].append(inputs[0].detach().to(torch.float32).numpy())

        hooks.append(module.register_forward_hook(grab))
    try:
        contexts, _ = windows(encode(corpus_text), limit=n_samples)
        model(torch.from_numpy(contexts))
    finally:
        for hook in hooks:
            hook.remove()
    return {name: np.concatenate(parts, axis=0) for name, parts in captured.items()}


def export_model(checkpoint, patterns, corpus_path, n_samples, out_dir):
    if n_samples < 1:
        raise SystemExit("export: --samples must be >= 1")
    model = load_model(checkpoint)
    layers = resolve_layers(model, patterns)
    corpus_text = Path(corpus_path).read_text("utf-8")
    activations = capture_activations(model, layers, corpus_text, n_samples)

    model_tensors = {}
    calib_tensors = {}
    manifest = {"layers": []}
    for name, module in layers.items():
        weight = module.weight.detach().to(torch.float32).numpy()
        model_tensors[f"{name}.weight"] = weight
        entry = {"name": name, "weight": f"{name}.weight", "calib": f"{name}.calib"}
        if module.bias is not None:
            model_tensors[f"{name}.bias"] = (
                module.bias.detach().to(torch.float32).numpy().reshape(-1, 1)
            )
            entry["bias"] = f"{name}.bias"
        rows = activations[name]
        if rows.shape[1] != weight.shape[1]:
            raise SystemExit(
                f"export: layer {name}: captured width {rows.shape[1]} "
                f"!= weight d_in {weight.shape[1]}"
            )
        calib_tensors[f"{name}.calib"] = rows
        manifest["layers"].append(entry)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mxpt.write_file(out / "model.mxpt", model_tensors)
    mxpt.write_file(out / "calib.mxpt", calib_tensors)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", default=str(HERE / "assets" / "tiny_lm.pt"),
                        help="checkpoint path (state dict)")
    parser.add_argument("--layers", default="fc*,head",
                        help="comma-separated glob patterns over linear-layer names")
    parser.add_argument("--samples", type=int, default=512,
                        help="calibration windows to record")
    parser.add_argument("--corpus", default=str(HERE / "assets" / "corpus.txt"),
                        help="calibration text source")
    parser.add_argument("--out-dir", required=True)
    args = parser.parse_args(argv)
    out = export_model(args.model, args.layers, args.corpus, args.samples, args.out_dir)
    print(f"exported model.mxpt, calib.mxpt, manifest.json to {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
