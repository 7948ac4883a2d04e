"""Command-line entry points.

Subcommands: ``prune``, ``sensitivity``, ``allocate``, ``eval``,
``gen-fixture``.  Exit codes: 0 success, 2 validation/config, 3 numerical,
4 budget, 5 I/O or malformed container.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import allocator as alloc
from .calibration import accumulate, dampen, invert_hessian, new_state
from .errors import ConfigError, MixpruneError, exit_code_for
from .fixtures import gen_fixture, parse_layer_shapes, write_fixture
from .model_io import load_manifest, read_container_file, validate_manifest, write_container_file
from .pipeline import PruneConfig, eval_model, run_pipeline
from .saliency import compute_saliency

_CRITERION_CLI = {"magnitude": "magnitude", "act-norm": "act_norm", "obs": "obs", "isc": "isc"}
_SCOPE_CLI = {"per-row": "per_row", "per-layer": "per_layer"}


def _dump_json(doc, path: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, "utf-8")


def _parse_nm(text: str) -> tuple[int, int]:
    try:
        n, m = (int(v) for v in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"malformed n:m pattern {text!r}; expected N:M") from exc
    return n, m


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model container (.mxpt)")
    p.add_argument("--manifest", required=True, help="manifest JSON")
    p.add_argument("--calib", required=True, help="calibration container (.mxpt)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixprune",
        description="Post-training pruning with Hessian saliency, OBS compensation, "
        "and sensitivity-aware sparsity allocation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prune", help="prune a model end to end")
    _add_model_args(p)
    p.add_argument("--sparsity", type=float, default=0.5)
    p.add_argument("--criterion", choices=sorted(_CRITERION_CLI), default="obs")
    p.add_argument("--allocator", choices=sorted(alloc.ALLOCATORS), default="inverse")
    p.add_argument("--scope", choices=sorted(_SCOPE_CLI), default="per-row")
    p.add_argument("--damp", type=float, default=0.01, help="dampening percent of mean diag(H)")
    p.add_argument("--method", choices=["closed-form", "iterative-obs", "prune-only"],
                   default="closed-form")
    p.add_argument("--nm", type=_parse_nm, default=None, metavar="N:M")
    p.add_argument("--block", type=int, default=None,
                   help="blocked pruning with this column width")
    p.add_argument("--pmin", type=float, default=None)
    p.add_argument("--pmax", type=float, default=None)
    p.add_argument("--probe", type=float, default=None, help="sensitivity probe sparsity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output container path")
    p.add_argument("--report", required=True, help="output report JSON path")

    p = sub.add_parser("sensitivity", help="emit per-layer sensitivity scores")
    _add_model_args(p)
    p.add_argument("--criterion", choices=sorted(_CRITERION_CLI), default="obs")
    p.add_argument("--probe", type=float, default=0.5)
    p.add_argument("--damp", type=float, default=0.01)
    p.add_argument("--out", default=None, help="output JSON (default stdout)")

    p = sub.add_parser("allocate", help="turn sensitivities into a sparsity plan")
    p.add_argument("--sensitivities", required=True, help="JSON from the sensitivity command")
    p.add_argument("--sparsity", type=float, required=True)
    p.add_argument("--pmin", type=float, default=None)
    p.add_argument("--pmax", type=float, default=None)
    p.add_argument("--allocator", choices=["inverse", "uniform"], default="inverse")
    p.add_argument("--out", default=None, help="output JSON (default stdout)")

    p = sub.add_parser("eval", help="direct output-error comparison of two containers")
    _add_model_args(p)
    p.add_argument("--other", required=True, help="second model container (.mxpt)")
    p.add_argument("--out", default=None, help="output JSON (default stdout)")

    p = sub.add_parser("gen-fixture", help="generate a synthetic model + calibration pair")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--layers", required=True, help='layer shapes, e.g. "8x16,16x16,16x8"')
    p.add_argument("--hetero", type=float, default=0.0, help="sensitivity heterogeneity knob")
    p.add_argument("--samples", type=int, default=None, help="samples per layer (default 4*d_in)")
    p.add_argument("--out-dir", required=True)
    return parser


def _cmd_prune(args) -> None:
    config = PruneConfig(
        sparsity=args.sparsity,
        criterion=_CRITERION_CLI[args.criterion],
        allocator=args.allocator,
        scope=_SCOPE_CLI[args.scope],
        damp_percent=args.damp,
        method="blocked" if args.block is not None else args.method.replace("-", "_"),
        block=args.block,
        nm=args.nm,
        p_min=args.pmin,
        p_max=args.pmax,
        sensitivity_probe=args.probe,
        seed=args.seed,
    )
    model = read_container_file(args.model)
    calib = read_container_file(args.calib)
    manifest = load_manifest(args.manifest)
    pruned, report = run_pipeline(config, model, manifest, calib)
    write_container_file(args.out, pruned)
    _dump_json(report, args.report)
    g = report["global"]
    print(
        f"pruned {g['n_layers']} layers: sparsity "
        f"{g['parameter_weighted_sparsity']:.4f}, total recon error "
        f"{g['total_recon_error']:.6g}"
    )


def _cmd_sensitivity(args) -> None:
    model = read_container_file(args.model)
    calib = read_container_file(args.calib)
    resolved = validate_manifest(load_manifest(args.manifest), {**model, **calib})
    scores = []
    for layer in resolved:
        state = accumulate(new_state(layer.d_in), calib[layer.calib])
        if args.damp > 0:
            state = dampen(state, args.damp)
        h_inv = invert_hessian(state)
        smap = compute_saliency(
            model[layer.weight], state=state, H_inv=h_inv,
            criterion=_CRITERION_CLI[args.criterion],
        )
        sens = alloc.layer_sensitivity(layer.name, model[layer.weight], smap, args.probe)
        scores.append(
            {"layer": sens.name, "score": sens.score, "param_count": sens.param_count}
        )
    _dump_json(scores, args.out)


def _cmd_allocate(args) -> None:
    doc = json.loads(Path(args.sensitivities).read_text("utf-8"))
    sens = [
        alloc.LayerSensitivity(e["layer"], float(e["score"]), int(e["param_count"]))
        for e in doc
    ]
    if args.allocator == "uniform":
        plan = alloc.plan_uniform(sens, args.sparsity)
    else:
        plan = alloc.allocate_sparsity(sens, args.sparsity, p_min=args.pmin, p_max=args.pmax)
    _dump_json(
        {
            "global_target": plan.global_target,
            "p_min": plan.p_min,
            "p_max": plan.p_max,
            "per_layer": plan.per_layer,
            "parameter_weighted_mean": plan.weighted_mean(),
        },
        args.out,
    )


def _cmd_eval(args) -> None:
    model_a = read_container_file(args.model)
    model_b = read_container_file(args.other)
    calib = read_container_file(args.calib)
    result = eval_model(model_a, model_b, load_manifest(args.manifest), calib)
    _dump_json(result, args.out)


def _cmd_gen_fixture(args) -> None:
    shapes = parse_layer_shapes(args.layers)
    model, manifest, calib = gen_fixture(
        args.seed, shapes, hetero=args.hetero, n_samples=args.samples
    )
    paths = write_fixture(args.out_dir, model, manifest, calib)
    print(f"wrote {paths['model']}, {paths['calib']}, {paths['manifest']}")


_COMMANDS = {
    "prune": _cmd_prune,
    "sensitivity": _cmd_sensitivity,
    "allocate": _cmd_allocate,
    "eval": _cmd_eval,
    "gen-fixture": _cmd_gen_fixture,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except (MixpruneError, OSError) as exc:
        print(f"mixprune {args.command}: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
