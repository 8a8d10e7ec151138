"""Shared builders for the test suite."""

from __future__ import annotations

from uqod.clustering import DetectionCluster
from uqod.types import BoundingBox, Detection, PredictionDump, SoftmaxScore


def det(x1, y1, x2, y2, probs=(1.0, 0.0, 0.0), pass_index=0) -> Detection:
    return Detection(
        box=BoundingBox(float(x1), float(y1), float(x2), float(y2)),
        score=SoftmaxScore(tuple(float(p) for p in probs)),
        pass_index=pass_index,
    )


def cluster(*dets: Detection) -> DetectionCluster:
    return DetectionCluster(members=tuple(dets))


def dump(dets, image_id="img0001", num_passes=20, dropout_rate=0.25) -> PredictionDump:
    return PredictionDump(
        image_id=image_id,
        num_passes=num_passes,
        dropout_rate=dropout_rate,
        detections=tuple(dets),
    )
