"""Command-line interface.

Four subcommands: ``evaluate`` (per-image metrics + dataset summary),
``robustness`` (adversarial robustness scores), ``compare`` (statistical
comparison of evaluation runs), and ``synth`` (synthetic dataset generator).

Exit codes: 0 success, 2 schema violation or unreadable input, 3 empty
manifest, 4 mismatched image sets in a comparison.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import UqodError
from .pipeline import RunConfig, run_compare, run_evaluate, run_robustness
from .synthgen import config_from_obj, write_dataset


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", required=True, help="dataset manifest JSON")
    parser.add_argument("--dumps", required=True, help="directory of <image_id>.json dumps")
    parser.add_argument("--out", required=True, help="output directory for reports")
    parser.add_argument("--iou-threshold", type=float, default=0.5)
    parser.add_argument("--min-samples", type=int, default=3)
    parser.add_argument("--min-cluster-size", type=int, default=3)
    parser.add_argument(
        "--map-source",
        choices=("consensus", "pass0"),
        default="consensus",
        help="detections scored against GT: cluster consensus or the raw first pass",
    )
    parser.add_argument("--model-id", default=None, help="label for the run (default: dumps dir name)")


def _run_config(args: argparse.Namespace, normalize_uqm: str | None = None) -> RunConfig:
    return RunConfig(
        manifest_path=args.manifest,
        dumps_dir=args.dumps,
        out_dir=args.out,
        iou_threshold=args.iou_threshold,
        min_samples=args.min_samples,
        min_cluster_size=args.min_cluster_size,
        map_source=args.map_source,
        normalize_uqm=normalize_uqm,
        model_id=args.model_id,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uqod")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="per-image metrics and dataset summary")
    _add_run_options(p_eval)

    p_rob = sub.add_parser("robustness", help="adversarial robustness scores")
    _add_run_options(p_rob)
    p_rob.add_argument(
        "--normalize-uqm",
        choices=("minmax",),
        default=None,
        help="rescale each uncertainty metric to [0, 1] before scoring",
    )

    p_cmp = sub.add_parser("compare", help="statistical comparison of evaluation runs")
    p_cmp.add_argument("--runs", nargs="+", required=True, help="two or more run.json files")
    p_cmp.add_argument("--alpha", type=float, default=0.05)
    p_cmp.add_argument("--out", required=True, help="output directory")

    p_syn = sub.add_parser("synth", help="generate a synthetic dataset")
    p_syn.add_argument("--config", required=True, help="generator config JSON")
    p_syn.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "evaluate":
            summary = run_evaluate(_run_config(args))
            print(f"evaluated {summary['n_images']} images -> {args.out}")
        elif args.command == "robustness":
            summary = run_robustness(_run_config(args, normalize_uqm=args.normalize_uqm))
            print(f"robustness over {summary['n_entries']} entries -> {args.out}")
        elif args.command == "compare":
            if len(args.runs) < 2:
                print("compare needs at least two runs", file=sys.stderr)
                return 2
            report = run_compare(args.runs, args.alpha, args.out)
            print(f"compared {len(report['runs'])} runs over {report['n_images']} images -> {args.out}")
        elif args.command == "synth":
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
            manifest_path = write_dataset(config_from_obj(raw), args.out)
            print(f"wrote {manifest_path}")
    except UqodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
