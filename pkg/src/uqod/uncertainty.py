"""Per-cluster uncertainty metrics and their image-level aggregate.

Five measures per detection cluster, all computed from the member boxes and
softmax vectors alone:

* variation ratio (vr): disagreement among the predicted labels;
* shannon entropy (se): entropy of the mean softmax, natural log;
* mutual information (mi): entropy of the mean minus mean of the entropies,
  i.e. the disagreement part of the entropy;
* total variance (tv): summed per-coordinate sample variance of the corners;
* predictive surface (ps): mean convex-hull area of the four corner clouds.

Logs are natural; probabilities are clamped to [1e-12, 1] inside logs and
0 * log 0 counts as 0, so one-hot vectors give exactly zero entropy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import DetectionCluster
from .geometry import Point2D, convex_hull, polygon_area
from .types import predicted_label

LOG_EPS = 1e-12

# every (x, y) pairing of the two stored corners, hulled separately
_CORNER_PAIRS = ((0, 1), (2, 3), (2, 1), (0, 3))


@dataclass(frozen=True)
class ObjectUncertainty:
    vr: float
    se: float
    mi: float
    tv: float
    ps: float


@dataclass(frozen=True)
class ImageUncertainty:
    """Unweighted means over an image's clusters."""

    n_clusters: int
    vr: float
    se: float
    mi: float
    tv: float
    ps: float


def _require_members(cluster: DetectionCluster) -> None:
    if cluster.size == 0:
        raise ValueError("uncertainty metrics need a non-empty cluster")


def _softmax_matrix(cluster: DetectionCluster) -> np.ndarray:
    return np.asarray([s.probabilities for s in cluster.softmaxes], dtype=float)


def _box_matrix(cluster: DetectionCluster) -> np.ndarray:
    return np.asarray([b.as_tuple() for b in cluster.boxes], dtype=float)


def _entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    # the trailing + 0.0 folds a negative zero back to plain zero
    return float(-(p * np.log(np.clip(p, LOG_EPS, 1.0))).sum() + 0.0)


def variation_ratio(cluster: DetectionCluster) -> float:
    """1 - (count of the modal predicted label) / cluster size.

    Evaluated as (W - mode) / W so the integer numerator keeps the result
    exactly representable (a three-way split of three gives float 2/3, not
    one ulp above it).
    """
    _require_members(cluster)
    labels = [predicted_label(s) for s in cluster.softmaxes]
    mode_count = max(labels.count(lab) for lab in set(labels))
    return (cluster.size - mode_count) / cluster.size


def shannon_entropy(cluster: DetectionCluster) -> float:
    """Entropy of the mean softmax vector (the total predictive uncertainty)."""
    _require_members(cluster)
    return _entropy(_softmax_matrix(cluster).mean(axis=0))


def mutual_information(cluster: DetectionCluster) -> float:
    """Entropy of the mean minus the mean entropy; the disagreement share.

    Mathematically non-negative and bounded by the shannon entropy of the
    cluster; rounding residue below zero is clamped to 0.
    """
    _require_members(cluster)
    sm = _softmax_matrix(cluster)
    mean_entropy = float(np.mean([_entropy(row) for row in sm]))
    mi = _entropy(sm.mean(axis=0)) - mean_entropy
    return max(mi, 0.0) + 0.0


def total_variance(cluster: DetectionCluster) -> float:
    """Sum of the four per-coordinate sample variances of the member boxes.

    Uses the W - 1 denominator; a single-member cluster has zero variance by
    convention. Coordinates are centred on the first member before the
    variance so an all-identical cluster comes out exactly zero.
    """
    _require_members(cluster)
    boxes = _box_matrix(cluster)
    w = boxes.shape[0]
    if w < 2:
        return 0.0
    centred = boxes - boxes[0]
    mean = centred.mean(axis=0)
    ss = ((centred - mean) ** 2).sum(axis=0)
    return float((ss / (w - 1)).sum())


def predictive_surface(cluster: DetectionCluster) -> float:
    """Mean convex-hull area of the four corner point clouds."""
    _require_members(cluster)
    boxes = _box_matrix(cluster)
    areas = []
    for ix, iy in _CORNER_PAIRS:
        pts = [Point2D(x, y) for x, y in zip(boxes[:, ix], boxes[:, iy])]
        areas.append(polygon_area(convex_hull(pts)))
    return float(np.mean(areas))


def object_uncertainty(cluster: DetectionCluster) -> ObjectUncertainty:
    return ObjectUncertainty(
        vr=variation_ratio(cluster),
        se=shannon_entropy(cluster),
        mi=mutual_information(cluster),
        tv=total_variance(cluster),
        ps=predictive_surface(cluster),
    )


def image_uncertainty(clusters: list[DetectionCluster]) -> ImageUncertainty | None:
    """Unweighted mean of each metric over the clusters; None when there are none.

    Noise detections never reach this function: an image where nothing
    clustered has no uncertainty value rather than a zero.
    """
    if not clusters:
        return None
    per_object = [object_uncertainty(c) for c in clusters]
    agg = {
        name: float(np.mean([getattr(o, name) for o in per_object]))
        for name in ("vr", "se", "mi", "tv", "ps")
    }
    return ImageUncertainty(n_clusters=len(clusters), **agg)
