"""End-to-end report pipeline behind the command-line interface.

Three entry points: :func:`run_evaluate` turns a manifest plus prediction
dumps into per-image metrics and a dataset summary; :func:`run_robustness`
adds the adversarial pairings and robustness scores; :func:`run_compare`
runs the statistical battery over two or more evaluation runs.

Reports are written deterministically: rows sorted by image id, CSV floats
with 6 significant digits, JSON with sorted keys, seeded bootstrap. Running
a command twice on the same inputs produces byte-identical files.

Images can be processed concurrently (``UQOD_THREADS`` caps the pool);
results are assembled in manifest order, so the report does not depend on
scheduling.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import io as uio
from .accuracy import consensus_detections, mean_average_precision, pass_detections
from .clustering import ClusterParams, cluster_detections
from .errors import EmptyManifestError, ImageSetMismatchError, SchemaError
from .robustness import UQ_METRIC_NAMES, PairedMetrics, rs_map, rs_uq, rs_uqm
from .stats import (
    PairedSampleMatrix,
    directional_compare,
    friedman,
    holm_bonferroni,
    rank_biserial,
    spearman,
)
from .types import (
    DatasetManifest,
    EvaluationRun,
    ImageMetrics,
    PredictionDump,
    validate_dump,
)
from .uncertainty import image_uncertainty

BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_SEED = 715

METRIC_COLUMNS = ("mAP", "VR", "SE", "MI", "TV", "PS")
_METRIC_ATTRS = dict(zip(METRIC_COLUMNS, ("mean_ap", "vr", "se", "mi", "tv", "ps")))


@dataclass(frozen=True)
class RunConfig:
    manifest_path: str
    dumps_dir: str
    out_dir: str
    iou_threshold: float = 0.5
    min_samples: int = 3
    min_cluster_size: int = 3
    map_source: str = "consensus"
    normalize_uqm: str | None = None
    model_id: str | None = None

    def __post_init__(self):
        if self.map_source not in ("consensus", "pass0"):
            raise ValueError("map_source must be 'consensus' or 'pass0'")
        if self.normalize_uqm not in (None, "minmax"):
            raise ValueError("normalize_uqm must be omitted or 'minmax'")
        if not (0.0 < self.iou_threshold <= 1.0):
            raise ValueError("iou_threshold must lie in (0, 1]")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    n_clusters: int
    n_noise: int
    metrics: ImageMetrics


def _thread_count() -> int:
    raw = os.environ.get("UQOD_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_ordered(fn: Callable, items: Sequence) -> list:
    workers = _thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def load_dataset(
    manifest_path: str | Path, dumps_dir: str | Path, include_adversarial: bool = False
) -> tuple[DatasetManifest, dict[str, PredictionDump]]:
    """Read and validate the manifest and every dump it references.

    Raises ``SchemaError`` with one diagnostic per problem (missing dump
    files, malformed JSON, wire-format violations) and ``EmptyManifestError``
    when there is nothing to evaluate.
    """
    manifest = uio.read_manifest(manifest_path)
    if not manifest.entries:
        raise EmptyManifestError(f"{manifest_path}: manifest has no entries")
    needed: list[str] = []
    for entry in manifest.entries:
        needed.append(entry.original)
        if include_adversarial:
            needed.extend(entry.adversarial)
    dumps: dict[str, PredictionDump] = {}
    diags: list[str] = []
    dumps_dir = Path(dumps_dir)
    for image_id in needed:
        path = dumps_dir / f"{image_id}.json"
        if not path.is_file():
            diags.append(f"missing dump for image '{image_id}' (expected {path})")
            continue
        try:
            dump = uio.read_dump(path)
        except SchemaError as exc:
            diags.extend(exc.diagnostics or [str(exc)])
            continue
        if dump.image_id != image_id:
            diags.append(f"{path}: image_id '{dump.image_id}' does not match '{image_id}'")
            continue
        result = validate_dump(dump)
        diags.extend(f"{path}: {v}" for v in result.violations)
        if result.ok:
            dumps[image_id] = dump
    if diags:
        raise SchemaError("input validation failed", diags)
    return manifest, dumps


def evaluate_image(dump, annotation, config: RunConfig) -> ImageRecord:
    """Cluster one dump, aggregate its uncertainty, and score it against GT."""
    params = ClusterParams(config.min_samples, config.min_cluster_size)
    clusters, noise = cluster_detections(dump, params)
    uq = image_uncertainty(clusters)
    if config.map_source == "pass0":
        dets = pass_detections(dump, 0)
    else:
        dets = consensus_detections(clusters)
    if annotation.objects:
        map_value = mean_average_precision([(dets, annotation)], config.iou_threshold)
    else:
        map_value = None
    return ImageRecord(
        image_id=dump.image_id,
        n_clusters=len(clusters),
        n_noise=len(noise),
        metrics=ImageMetrics(
            mean_ap=map_value,
            vr=uq.vr if uq else None,
            se=uq.se if uq else None,
            mi=uq.mi if uq else None,
            tv=uq.tv if uq else None,
            ps=uq.ps if uq else None,
        ),
    )


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6g}"


def _bootstrap_ci(values: Sequence[float]) -> tuple[float, float] | None:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return None
    rng = np.random.default_rng(BOOTSTRAP_SEED)
    idx = rng.integers(0, arr.size, size=(BOOTSTRAP_RESAMPLES, arr.size))
    means = arr[idx].mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float(lo), float(hi)


def _metric_summary(records: list[ImageRecord]) -> dict:
    out: dict[str, dict] = {}
    for column in METRIC_COLUMNS:
        attr = _METRIC_ATTRS[column]
        values = [
            getattr(r.metrics, attr) for r in records if getattr(r.metrics, attr) is not None
        ]
        ci = _bootstrap_ci(values)
        out[column] = {
            "mean": float(np.mean(values)) if values else None,
            "ci95": list(ci) if ci else None,
            "n": len(values),
        }
    return out


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_evaluate(config: RunConfig) -> dict:
    """Evaluate the original images of a dataset; returns the summary object.

    Writes ``per_image.csv``, ``summary.json``, and ``run.json`` (the
    evaluation-run file consumed by ``compare``) into the output directory.
    """
    manifest, dumps = load_dataset(config.manifest_path, config.dumps_dir)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = sorted(manifest.entries, key=lambda e: e.original)
    records = _map_ordered(
        lambda entry: evaluate_image(dumps[entry.original], entry.annotation, config),
        entries,
    )

    lines = ["image_id,n_clusters,n_noise,mAP,VR,SE,MI,TV,PS"]
    for r in records:
        m = r.metrics
        lines.append(
            ",".join(
                [
                    r.image_id,
                    str(r.n_clusters),
                    str(r.n_noise),
                    _fmt(m.mean_ap),
                    _fmt(m.vr),
                    _fmt(m.se),
                    _fmt(m.mi),
                    _fmt(m.tv),
                    _fmt(m.ps),
                ]
            )
        )
    (out_dir / "per_image.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    dropout_rate = dumps[entries[0].original].dropout_rate
    model_id = config.model_id or Path(config.dumps_dir).name
    run = EvaluationRun(
        model_id=model_id,
        dataset_id=manifest.name,
        dropout_rate=dropout_rate,
        per_image={r.image_id: r.metrics for r in records},
    )
    uio.write_run(run, out_dir / "run.json")

    summary = {
        "dataset": manifest.name,
        "model_id": model_id,
        "dropout_rate": dropout_rate,
        "iou_threshold": config.iou_threshold,
        "map_source": config.map_source,
        "n_images": len(records),
        "images_with_clusters": sum(1 for r in records if r.n_clusters > 0),
        "metrics": _metric_summary(records),
    }
    _write_json(summary, out_dir / "summary.json")
    return summary


def _minmax_normalise(per_image_uq: dict[str, dict[str, float | None]]) -> dict:
    """Min-max rescale each UQ metric to [0, 1] across all images in scope."""
    normalised = {img: dict(vals) for img, vals in per_image_uq.items()}
    for name in UQ_METRIC_NAMES:
        values = [v[name] for v in per_image_uq.values() if v[name] is not None]
        if not values:
            continue
        lo, hi = min(values), max(values)
        span = hi - lo
        for img in normalised:
            v = normalised[img][name]
            if v is None:
                continue
            normalised[img][name] = (v - lo) / span if span > 0 else 0.0
    return normalised


def run_robustness(config: RunConfig) -> dict:
    """Score robustness of accuracy and uncertainty against adversarial variants.

    Writes ``robustness.csv`` and ``robustness_summary.json``. Entries with
    no adversarial variants are skipped; images where any member of a pairing
    has no clusters contribute no RS_uq. Both cases are counted in the
    summary rather than silently dropped.
    """
    manifest, dumps = load_dataset(config.manifest_path, config.dumps_dir, include_adversarial=True)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = sorted(manifest.entries, key=lambda e: e.original)
    usable = [e for e in entries if e.adversarial]
    skipped_no_adversarial = len(entries) - len(usable)

    def record_for(image_id, annotation):
        return evaluate_image(dumps[image_id], annotation, config)

    all_records: dict[str, ImageRecord] = {}
    flat: list[tuple[str, object]] = []
    for entry in usable:
        flat.append((entry.original, entry.annotation))
        flat.extend((adv, entry.annotation) for adv in entry.adversarial)
    for (image_id, _), rec in zip(flat, _map_ordered(lambda t: record_for(*t), flat)):
        all_records[image_id] = rec

    per_image_uq = {
        image_id: {name: getattr(rec.metrics, name) for name in UQ_METRIC_NAMES}
        for image_id, rec in all_records.items()
    }
    if config.normalize_uqm == "minmax":
        per_image_uq = _minmax_normalise(per_image_uq)

    rows = []
    skipped_no_uq = 0
    skipped_no_gt = 0
    for entry in usable:
        orig = all_records[entry.original]
        adv_recs = [all_records[a] for a in entry.adversarial]

        if orig.metrics.mean_ap is None or any(r.metrics.mean_ap is None for r in adv_recs):
            rs_map_value = None
            skipped_no_gt += 1
        else:
            rs_map_value = rs_map(
                PairedMetrics(
                    orig.metrics.mean_ap,
                    tuple(r.metrics.mean_ap for r in adv_recs),
                )
            )

        per_metric: dict[str, float | None] = {}
        uq_defined = True
        for name in UQ_METRIC_NAMES:
            o = per_image_uq[entry.original][name]
            advs = [per_image_uq[a][name] for a in entry.adversarial]
            if o is None or any(v is None for v in advs):
                per_metric[name] = None
                uq_defined = False
            else:
                per_metric[name] = rs_uqm(PairedMetrics(o, tuple(advs)))
        if uq_defined:
            rs_uq_value = rs_uq({k: v for k, v in per_metric.items()})
        else:
            rs_uq_value = None
            skipped_no_uq += 1
        rows.append((entry.original, rs_map_value, per_metric, rs_uq_value))

    lines = ["image_id,RS_mAP,RS_VR,RS_SE,RS_MI,RS_TV,RS_PS,RS_uq"]
    for image_id, rs_map_value, per_metric, rs_uq_value in rows:
        lines.append(
            ",".join(
                [image_id, _fmt(rs_map_value)]
                + [_fmt(per_metric[name]) for name in UQ_METRIC_NAMES]
                + [_fmt(rs_uq_value)]
            )
        )
    (out_dir / "robustness.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    def _mean(values):
        vals = [v for v in values if v is not None]
        return float(np.mean(vals)) if vals else None

    summary = {
        "dataset": manifest.name,
        "iou_threshold": config.iou_threshold,
        "map_source": config.map_source,
        "normalize_uqm": config.normalize_uqm,
        "n_entries": len(entries),
        "skipped_no_adversarial": skipped_no_adversarial,
        "skipped_no_uq": skipped_no_uq,
        "skipped_no_gt": skipped_no_gt,
        "rs_map": _mean([r[1] for r in rows]),
        "rs_per_uqm": {
            name: _mean([r[2][name] for r in rows]) for name in UQ_METRIC_NAMES
        },
        "rs_uq": _mean([r[3] for r in rows]),
    }
    _write_json(summary, out_dir / "robustness_summary.json")
    return summary


def _run_labels(runs: list[EvaluationRun]) -> list[str]:
    labels = []
    seen: dict[str, int] = {}
    for run in runs:
        count = seen.get(run.model_id, 0)
        seen[run.model_id] = count + 1
        labels.append(run.model_id if count == 0 else f"{run.model_id}#{count + 1}")
    return labels


def _pairwise_battery(matrix: np.ndarray, labels: list[str], alpha: float, higher_better: bool):
    """All-pairs signed-rank comparisons with Holm correction and effect sizes."""
    k = matrix.shape[1]
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    outcomes = [directional_compare(matrix[:, i], matrix[:, j]) for i, j in pairs]
    corrections = holm_bonferroni([o.p_value for o in outcomes], alpha)
    effects = [rank_biserial(matrix[:, i], matrix[:, j]) for i, j in pairs]
    results = []
    beaten: set[int] = set()
    for (i, j), outcome, corr, eff in zip(pairs, outcomes, corrections, effects):
        if corr.reject and eff.value != 0.0:
            larger, smaller = (i, j) if eff.value > 0 else (j, i)
            winner = larger if higher_better else smaller
            beaten.add(j if winner == i else i)
        results.append(
            {
                "a": labels[i],
                "b": labels[j],
                "alternative": outcome.extra.get("alternative"),
                "statistic": outcome.statistic,
                "p": outcome.p_value,
                "adjusted_p": corr.adjusted_p,
                "reject": corr.reject,
                "rank_biserial": eff.value,
                "magnitude": eff.magnitude,
            }
        )
    best = [labels[i] for i in range(k) if i not in beaten]
    return results, best


def run_compare(run_paths: Sequence[str | Path], alpha: float, out_dir: str | Path) -> dict:
    """Statistical comparison of two or more evaluation runs.

    Per metric: a Friedman test gates the family (three or more runs); only
    when it rejects at ``alpha`` do pairwise signed-rank tests run, corrected
    with Holm-Bonferroni and graded by rank-biserial correlation. The best
    set per metric contains every run not significantly beaten. Spearman
    correlations between mAP and each uncertainty metric are reported per
    run, Holm-corrected within the run.
    """
    if len(run_paths) < 2:
        raise ValueError("compare needs at least two runs")
    runs = [uio.read_run(p) for p in run_paths]
    labels = _run_labels(runs)

    image_sets = [set(r.per_image.keys()) for r in runs]
    if any(s != image_sets[0] for s in image_sets[1:]):
        union = set().union(*image_sets)
        detail = []
        for label, s in zip(labels, image_sets):
            missing = sorted(union - s)
            if missing:
                detail.append(f"{label} lacks: {', '.join(missing[:5])}")
        raise ImageSetMismatchError(
            "runs cover different image sets; " + "; ".join(detail)
        )
    images = sorted(image_sets[0])

    metrics_report: dict[str, dict] = {}
    for column in METRIC_COLUMNS:
        attr = _METRIC_ATTRS[column]
        rows = []
        for image_id in images:
            vals = [getattr(r.per_image[image_id], attr) for r in runs]
            if all(v is not None for v in vals):
                rows.append(vals)
        n_used = len(rows)
        entry: dict = {"n_images": n_used, "n_dropped": len(images) - n_used}
        if n_used < 2:
            entry["note"] = "insufficient paired data"
            metrics_report[column] = entry
            continue
        matrix = np.asarray(rows, dtype=float)
        higher_better = column == "mAP"
        if len(runs) >= 3:
            gate = friedman(PairedSampleMatrix(matrix))
            entry["friedman"] = {"statistic": gate.statistic, "p": gate.p_value}
            gate_passed = gate.p_value < alpha
        else:
            entry["friedman"] = None
            gate_passed = True
        if gate_passed:
            pairwise, best = _pairwise_battery(matrix, labels, alpha, higher_better)
            entry["pairwise"] = pairwise
            entry["best"] = sorted(best)
        else:
            entry["pairwise"] = []
            entry["best"] = sorted(labels)
        metrics_report[column] = entry

    correlations: dict[str, dict] = {}
    for label, run in zip(labels, runs):
        per_metric = {}
        outcomes = []
        for column in METRIC_COLUMNS[1:]:
            attr = _METRIC_ATTRS[column]
            pairs = [
                (run.per_image[i].mean_ap, getattr(run.per_image[i], attr))
                for i in images
                if run.per_image[i].mean_ap is not None
                and getattr(run.per_image[i], attr) is not None
            ]
            if len(pairs) < 3:
                per_metric[column] = {"note": "insufficient paired data"}
                outcomes.append(None)
                continue
            xs, ys = zip(*pairs)
            outcome = spearman(xs, ys)
            if outcome.extra.get("undefined"):
                per_metric[column] = {"note": "undefined rho (constant ranks)"}
                outcomes.append(None)
            else:
                per_metric[column] = {
                    "rho": outcome.statistic,
                    "p": outcome.p_value,
                    "n": outcome.extra["n"],
                }
                outcomes.append(outcome)
        defined = [(c, o) for c, o in zip(METRIC_COLUMNS[1:], outcomes) if o is not None]
        if defined:
            corrections = holm_bonferroni([o.p_value for _, o in defined], alpha)
            for (column, _), corr in zip(defined, corrections):
                per_metric[column]["adjusted_p"] = corr.adjusted_p
                per_metric[column]["significant"] = corr.reject
        correlations[label] = per_metric

    report = {
        "alpha": alpha,
        "runs": labels,
        "n_images": len(images),
        "metrics": metrics_report,
        "correlations": correlations,
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(report, out / "comparison.json")
    return report
