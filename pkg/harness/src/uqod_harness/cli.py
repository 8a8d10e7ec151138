"""Command line entry points: fixture, predict, attack."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from uqod.errors import SchemaError
from uqod.io import annotation_to_obj, parse_annotation, read_dump
from uqod.types import validate_dump

from .attack import attack_dataset
from .config import DagConfig, HarnessConfig
from .images import write_fixture
from .predict import mc_dropout_predict


def _png_list(images_dir: str) -> tuple[str, ...]:
    paths = sorted(Path(images_dir).glob("*.png"))
    if not paths:
        raise ValueError(f"no .png images under {images_dir}")
    return tuple(str(p) for p in paths)


def _load_scenes(path: str) -> dict:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: scene file must map image ids to annotations")
    return {
        image_id: parse_annotation(obj, where=f"{path}: {image_id}")
        for image_id, obj in raw.items()
    }


def _cmd_fixture(args) -> int:
    out = Path(args.out)
    paths, scenes = write_fixture(out / "images", n_images=args.images, seed=args.seed)
    scene_obj = {image_id: annotation_to_obj(ann) for image_id, ann in sorted(scenes.items())}
    (out / "scenes.json").write_text(json.dumps(scene_obj, indent=2), encoding="utf-8")
    print(f"wrote {len(paths)} images and scenes.json to {out}")
    return 0


def _cmd_predict(args) -> int:
    config = HarnessConfig(
        images=_png_list(args.images),
        out_dir=args.out,
        dropout_rate=args.dropout_rate,
        num_passes=args.passes,
        rng_seed=args.seed,
    )
    written = mc_dropout_predict(config)
    print(f"wrote {len(written)} dumps to {Path(args.out) / 'dumps'}")
    if args.check_schema:
        violations = []
        for path in written:
            result = validate_dump(read_dump(path))
            violations.extend(f"{path}: {v}" for v in result.violations)
        if violations:
            for v in violations:
                print(v, file=sys.stderr)
            return 2
        print(f"schema ok: {len(written)} dumps, 0 violations")
    return 0


def _cmd_attack(args) -> int:
    config = HarnessConfig(
        images=_png_list(args.images),
        out_dir=args.out,
        rng_seed=args.seed,
        runs_per_image=args.runs,
        dag=DagConfig(
            max_iterations=args.max_iterations,
            step_size=args.step_size,
            epsilon=args.epsilon,
            target_policy=args.policy,
        ),
    )
    scenes = _load_scenes(args.scenes)
    manifest_path, report = attack_dataset(config, scenes)
    successes = sum(1 for r in report.values() if r["success"])
    print(f"attacked {len(config.images)} images: {successes}/{len(report)} variants succeeded")
    print(f"manifest at {manifest_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uqod-harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fix = sub.add_parser("fixture", help="render a synthetic image fixture")
    p_fix.add_argument("--out", required=True, help="output directory")
    p_fix.add_argument("--images", type=int, default=5)
    p_fix.add_argument("--seed", type=int, default=0)
    p_fix.set_defaults(func=_cmd_fixture)

    p_pred = sub.add_parser("predict", help="MC-dropout passes to prediction dumps")
    p_pred.add_argument("--images", required=True, help="directory of .png inputs")
    p_pred.add_argument("--out", required=True, help="output directory")
    p_pred.add_argument("--passes", type=int, default=20)
    p_pred.add_argument("--dropout-rate", type=float, default=0.25)
    p_pred.add_argument("--seed", type=int, default=0)
    p_pred.add_argument(
        "--check-schema",
        action="store_true",
        help="validate every written dump against the wire format",
    )
    p_pred.set_defaults(func=_cmd_predict)

    p_atk = sub.add_parser("attack", help="gradient attack producing adversarial variants")
    p_atk.add_argument("--images", required=True, help="directory of clean .png inputs")
    p_atk.add_argument("--scenes", required=True, help="scenes.json with ground truth")
    p_atk.add_argument("--out", required=True, help="output directory")
    p_atk.add_argument("--seed", type=int, default=0)
    p_atk.add_argument("--runs", type=int, default=10, help="attack runs per image")
    p_atk.add_argument("--max-iterations", type=int, default=150)
    p_atk.add_argument("--step-size", type=float, default=1 / 255)
    p_atk.add_argument("--epsilon", type=float, default=8 / 255)
    p_atk.add_argument("--policy", choices=("random", "background", "other"), default="random")
    p_atk.set_defaults(func=_cmd_attack)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for d in exc.diagnostics or ():
            print(f"  {d}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
