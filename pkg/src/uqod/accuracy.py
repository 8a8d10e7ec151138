"""Detection accuracy: consensus boxes, greedy matching, average precision.

A cluster collapses to one consensus detection (coordinate-wise mean box,
renormalised mean softmax). Matching against ground truth is greedy in
confidence order, same-class only, at a fixed IoU threshold; average
precision integrates the precision envelope over recall with all-point
interpolation. mAP averages the per-class APs over the classes that actually
occur in the ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .clustering import DetectionCluster
from .geometry import iou
from .types import BoundingBox, GroundTruthAnnotation, SoftmaxScore, predicted_label


@dataclass(frozen=True)
class ConsensusDetection:
    """One detection distilled from a cluster (or taken verbatim from a pass)."""

    box: BoundingBox
    score: SoftmaxScore
    label: int
    confidence: float


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]  # (detection idx, gt idx, iou)
    unmatched_detections: tuple[int, ...]
    unmatched_gt: tuple[int, ...]


def consensus(cluster: DetectionCluster) -> ConsensusDetection:
    """Mean box and renormalised mean softmax of the cluster members."""
    if cluster.size == 0:
        raise ValueError("consensus of an empty cluster")
    boxes = np.asarray([b.as_tuple() for b in cluster.boxes], dtype=float)
    mean_box = boxes.mean(axis=0)
    sm = np.asarray([s.probabilities for s in cluster.softmaxes], dtype=float)
    mean_sm = sm.mean(axis=0)
    mean_sm = mean_sm / mean_sm.sum()
    score = SoftmaxScore(tuple(float(v) for v in mean_sm))
    return ConsensusDetection(
        box=BoundingBox(*(float(v) for v in mean_box)),
        score=score,
        label=predicted_label(score),
        confidence=float(mean_sm.max()),
    )


def match(
    detections: Sequence[ConsensusDetection],
    annotation: GroundTruthAnnotation,
    iou_threshold: float = 0.5,
) -> MatchResult:
    """Greedy one-to-one matching, highest confidence first.

    Each detection claims the unmatched same-class ground-truth object with
    the highest IoU, provided that IoU >= threshold. Ties on confidence keep
    the original detection order; ties on IoU go to the lower object index.
    """
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].confidence, i))
    taken = [False] * len(annotation.objects)
    pairs: list[tuple[int, int, float]] = []
    unmatched_det: list[int] = []
    for i in order:
        det = detections[i]
        best_iou = 0.0
        best_gt = -1
        for g, obj in enumerate(annotation.objects):
            if taken[g] or obj.label != det.label:
                continue
            ov = iou(det.box, obj.box)
            if ov > best_iou:
                best_iou, best_gt = ov, g
        if best_gt >= 0 and best_iou >= iou_threshold:
            taken[best_gt] = True
            pairs.append((i, best_gt, best_iou))
        else:
            unmatched_det.append(i)
    pairs.sort()
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_detections=tuple(sorted(unmatched_det)),
        unmatched_gt=tuple(g for g, t in enumerate(taken) if not t),
    )


def _envelope_area(recalls: np.ndarray, precisions: np.ndarray) -> float:
    """All-point interpolated area under the precision envelope."""
    mrec = np.concatenate(([0.0], recalls, [1.0]))
    mpre = np.concatenate(([0.0], precisions, [0.0]))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    changed = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(((mrec[changed + 1] - mrec[changed]) * mpre[changed + 1]).sum())


def average_precision(
    scope: Sequence[tuple[Sequence[ConsensusDetection], GroundTruthAnnotation]],
    class_id: int,
    iou_threshold: float = 0.5,
) -> float | None:
    """AP of one class over a scope of (detections, annotation) pairs.

    Returns None when the class has no ground-truth object in the scope (the
    class is then excluded from the mAP mean). Detections are ranked by
    confidence across the whole scope; ties keep (scope position, detection
    index) order.
    """
    n_gt = sum(1 for _, ann in scope for obj in ann.objects if obj.label == class_id)
    if n_gt == 0:
        return None
    ranked: list[tuple[float, int, int]] = []
    for s, (dets, _) in enumerate(scope):
        for i, det in enumerate(dets):
            if det.label == class_id:
                ranked.append((-det.confidence, s, i))
    ranked.sort()
    taken: dict[int, list[bool]] = {}
    flags = np.zeros(len(ranked), dtype=bool)
    for rank, (_, s, i) in enumerate(ranked):
        dets, ann = scope[s]
        det = dets[i]
        used = taken.setdefault(s, [False] * len(ann.objects))
        best_iou = 0.0
        best_gt = -1
        for g, obj in enumerate(ann.objects):
            if used[g] or obj.label != class_id:
                continue
            ov = iou(det.box, obj.box)
            if ov > best_iou:
                best_iou, best_gt = ov, g
        if best_gt >= 0 and best_iou >= iou_threshold:
            used[best_gt] = True
            flags[rank] = True
    if len(ranked) == 0:
        return 0.0
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    recalls = tp / n_gt
    precisions = tp / (tp + fp)
    return _envelope_area(recalls, precisions)


def mean_average_precision(
    scope: Sequence[tuple[Sequence[ConsensusDetection], GroundTruthAnnotation]],
    iou_threshold: float = 0.5,
) -> float:
    """Mean AP over the classes present in the ground truth of the scope."""
    classes = sorted({obj.label for _, ann in scope for obj in ann.objects})
    if not classes:
        raise ValueError("empty ground truth: no class has any annotated object")
    aps = [average_precision(scope, c, iou_threshold) for c in classes]
    return float(np.mean([a for a in aps if a is not None]))


def consensus_detections(clusters: Iterable[DetectionCluster]) -> list[ConsensusDetection]:
    return [consensus(c) for c in clusters]


def pass_detections(dump, pass_index: int = 0) -> list[ConsensusDetection]:
    """Raw detections of one pass wrapped for matching (no cluster consensus)."""
    out = []
    for det in dump.detections:
        if det.pass_index != pass_index:
            continue
        out.append(
            ConsensusDetection(
                box=det.box,
                score=det.score,
                label=predicted_label(det.score),
                confidence=float(max(det.score.probabilities)),
            )
        )
    return out
