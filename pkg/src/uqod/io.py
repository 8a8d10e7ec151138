"""JSON wire formats for dumps, annotations, manifests, and evaluation runs.

All files are UTF-8 JSON with decimal floats. Parsing reports problems as
:class:`~uqod.errors.SchemaError` with a diagnostic per offending field, so a
caller sees everything wrong with a file at once.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .errors import SchemaError
from .types import (
    BoundingBox,
    DatasetManifest,
    Detection,
    EvaluationRun,
    GroundTruthAnnotation,
    GroundTruthObject,
    ImageMetrics,
    ManifestEntry,
    PredictionDump,
    SoftmaxScore,
)

_METRIC_KEYS = ("map", "vr", "se", "mi", "tv", "ps")


def _load_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc


def _require(obj: dict, key: str, kind: type | tuple, where: str, diags: list[str]):
    if key not in obj:
        diags.append(f"{where}: missing key '{key}'")
        return None
    val = obj[key]
    if not isinstance(val, kind):
        diags.append(f"{where}: key '{key}' has wrong type {type(val).__name__}")
        return None
    return val


def _parse_box(raw: Any, where: str, diags: list[str]) -> BoundingBox:
    if (
        not isinstance(raw, list)
        or len(raw) != 4
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw)
    ):
        diags.append(f"{where}: box must be a list of 4 numbers")
        return BoundingBox(0.0, 0.0, 0.0, 0.0)
    return BoundingBox(float(raw[0]), float(raw[1]), float(raw[2]), float(raw[3]))


def parse_dump(obj: Any, where: str = "dump") -> PredictionDump:
    """Build a :class:`PredictionDump` from decoded JSON, or raise ``SchemaError``."""
    diags: list[str] = []
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: top level must be an object")
    image_id = _require(obj, "image_id", str, where, diags)
    num_passes = _require(obj, "T", int, where, diags)
    rate = _require(obj, "dropout_rate", (int, float), where, diags)
    raw_dets = _require(obj, "detections", list, where, diags)
    detections: list[Detection] = []
    for i, rd in enumerate(raw_dets or []):
        det_where = f"{where}: detection {i}"
        if not isinstance(rd, dict):
            diags.append(f"{det_where}: must be an object")
            continue
        pass_index = _require(rd, "pass", int, det_where, diags)
        box = _parse_box(rd.get("box"), det_where, diags)
        raw_sm = rd.get("softmax")
        if not isinstance(raw_sm, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw_sm
        ):
            diags.append(f"{det_where}: softmax must be a list of numbers")
            raw_sm = []
        detections.append(
            Detection(
                box=box,
                score=SoftmaxScore(tuple(float(v) for v in raw_sm)),
                pass_index=int(pass_index) if pass_index is not None else 0,
            )
        )
    if diags:
        raise SchemaError(f"{where}: schema violations", diags)
    return PredictionDump(
        image_id=image_id,
        num_passes=int(num_passes),
        dropout_rate=float(rate),
        detections=tuple(detections),
    )


def read_dump(path: str | Path) -> PredictionDump:
    return parse_dump(_load_json(path), where=str(path))


def dump_to_obj(dump: PredictionDump) -> dict:
    return {
        "image_id": dump.image_id,
        "T": dump.num_passes,
        "dropout_rate": dump.dropout_rate,
        "detections": [
            {
                "pass": d.pass_index,
                "box": list(d.box.as_tuple()),
                "softmax": list(d.score.probabilities),
            }
            for d in dump.detections
        ],
    }


def write_dump(dump: PredictionDump, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dump_to_obj(dump)), encoding="utf-8")


def parse_annotation(obj: Any, where: str = "annotation") -> GroundTruthAnnotation:
    diags: list[str] = []
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: must be an object")
    image_id = _require(obj, "image_id", str, where, diags)
    raw_objs = _require(obj, "objects", list, where, diags)
    objects: list[GroundTruthObject] = []
    for i, ro in enumerate(raw_objs or []):
        obj_where = f"{where}: object {i}"
        if not isinstance(ro, dict):
            diags.append(f"{obj_where}: must be an object")
            continue
        label = _require(ro, "label", int, obj_where, diags)
        box = _parse_box(ro.get("box"), obj_where, diags)
        objects.append(GroundTruthObject(label=int(label) if label is not None else 0, box=box))
    if diags:
        raise SchemaError(f"{where}: schema violations", diags)
    return GroundTruthAnnotation(image_id=image_id, objects=tuple(objects))


def annotation_to_obj(ann: GroundTruthAnnotation) -> dict:
    return {
        "image_id": ann.image_id,
        "objects": [{"label": o.label, "box": list(o.box.as_tuple())} for o in ann.objects],
    }


def parse_manifest(obj: Any, where: str = "manifest") -> DatasetManifest:
    diags: list[str] = []
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: top level must be an object")
    name = _require(obj, "name", str, where, diags)
    raw_entries = _require(obj, "entries", list, where, diags)
    entries: list[ManifestEntry] = []
    for i, re_ in enumerate(raw_entries or []):
        e_where = f"{where}: entry {i}"
        if not isinstance(re_, dict):
            diags.append(f"{e_where}: must be an object")
            continue
        original = _require(re_, "original", str, e_where, diags)
        adv = re_.get("adversarial", [])
        if not isinstance(adv, list) or not all(isinstance(a, str) for a in adv):
            diags.append(f"{e_where}: adversarial must be a list of image ids")
            adv = []
        try:
            ann = parse_annotation(re_.get("annotation"), where=e_where + " annotation")
        except SchemaError as exc:
            diags.extend(exc.diagnostics or [str(exc)])
            ann = GroundTruthAnnotation(image_id="", objects=())
        entries.append(
            ManifestEntry(original=original or "", adversarial=tuple(adv), annotation=ann)
        )
    if diags:
        raise SchemaError(f"{where}: schema violations", diags)
    return DatasetManifest(name=name, entries=tuple(entries))


def read_manifest(path: str | Path) -> DatasetManifest:
    return parse_manifest(_load_json(path), where=str(path))


def manifest_to_obj(manifest: DatasetManifest) -> dict:
    return {
        "name": manifest.name,
        "entries": [
            {
                "original": e.original,
                "adversarial": list(e.adversarial),
                "annotation": annotation_to_obj(e.annotation),
            }
            for e in manifest.entries
        ],
    }


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest_to_obj(manifest), indent=2), encoding="utf-8")


def _metrics_to_obj(m: ImageMetrics) -> dict:
    return {
        "map": m.mean_ap,
        "vr": m.vr,
        "se": m.se,
        "mi": m.mi,
        "tv": m.tv,
        "ps": m.ps,
    }


def run_to_obj(run: EvaluationRun) -> dict:
    return {
        "model_id": run.model_id,
        "dataset_id": run.dataset_id,
        "dropout_rate": run.dropout_rate,
        "per_image": {
            image_id: _metrics_to_obj(m) for image_id, m in sorted(run.per_image.items())
        },
    }


def write_run(run: EvaluationRun, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(run_to_obj(run), indent=2, sort_keys=True), encoding="utf-8"
    )


def parse_run(obj: Any, where: str = "run") -> EvaluationRun:
    diags: list[str] = []
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: top level must be an object")
    model_id = _require(obj, "model_id", str, where, diags)
    dataset_id = _require(obj, "dataset_id", str, where, diags)
    rate = _require(obj, "dropout_rate", (int, float), where, diags)
    raw_pi = _require(obj, "per_image", dict, where, diags)
    per_image: dict[str, ImageMetrics] = {}
    for image_id, raw_m in (raw_pi or {}).items():
        m_where = f"{where}: image {image_id}"
        if not isinstance(raw_m, dict):
            diags.append(f"{m_where}: must be an object")
            continue
        vals = {}
        for key in _METRIC_KEYS:
            v = raw_m.get(key)
            if v is not None and not isinstance(v, (int, float)):
                diags.append(f"{m_where}: metric '{key}' must be a number or null")
                v = None
            vals[key] = float(v) if v is not None else None
        per_image[image_id] = ImageMetrics(
            mean_ap=vals["map"],
            vr=vals["vr"],
            se=vals["se"],
            mi=vals["mi"],
            tv=vals["tv"],
            ps=vals["ps"],
        )
    if diags:
        raise SchemaError(f"{where}: schema violations", diags)
    return EvaluationRun(
        model_id=model_id,
        dataset_id=dataset_id,
        dropout_rate=float(rate),
        per_image=per_image,
    )


def read_run(path: str | Path) -> EvaluationRun:
    return parse_run(_load_json(path), where=str(path))
