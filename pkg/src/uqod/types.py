"""Core data model: detections, prediction dumps, annotations, manifests.

Everything downstream (clustering, metrics, reports) speaks these types.
Objects are plain frozen dataclasses and never validate themselves on
construction; wire-level validation lives in :func:`validate_dump`, which
reports violations as data instead of raising, so callers can decide how
strict to be.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

CLASS_NAMES = ("sticker", "logo", "background")

SOFTMAX_SUM_TOL = 1e-6


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates: top-left (x1, y1), bottom-right (x2, y2)."""

    x1: float
    y1: float
    x2: float
    y2: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def width(self) -> float:
        return self.x2 - self.x1

    def height(self) -> float:
        return self.y2 - self.y1

    def area(self) -> float:
        return self.width() * self.height()

    def is_valid(self) -> bool:
        """True when all corners are finite and the box has positive extent."""
        vals = self.as_tuple()
        return all(math.isfinite(v) for v in vals) and self.x1 < self.x2 and self.y1 < self.y2


@dataclass(frozen=True)
class SoftmaxScore:
    """Class-probability vector; the number of classes is the vector length."""

    probabilities: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.probabilities)

    def is_valid(self) -> bool:
        p = self.probabilities
        if len(p) < 2:
            return False
        if not all(math.isfinite(v) and 0.0 <= v <= 1.0 for v in p):
            return False
        return abs(sum(p) - 1.0) <= SOFTMAX_SUM_TOL


def predicted_label(score: SoftmaxScore) -> int:
    """Argmax class index; ties go to the lowest index."""
    p = score.probabilities
    if not p:
        raise ValueError("empty softmax vector")
    best = max(p)
    return p.index(best)


@dataclass(frozen=True)
class Detection:
    """One box/softmax pair emitted by a single stochastic forward pass."""

    box: BoundingBox
    score: SoftmaxScore
    pass_index: int


@dataclass(frozen=True)
class PredictionDump:
    """All detections collected for one image over ``num_passes`` stochastic passes."""

    image_id: str
    num_passes: int
    dropout_rate: float
    detections: tuple[Detection, ...] = ()


@dataclass(frozen=True)
class GroundTruthObject:
    label: int
    box: BoundingBox


@dataclass(frozen=True)
class GroundTruthAnnotation:
    """Reference objects for one image."""

    image_id: str
    objects: tuple[GroundTruthObject, ...] = ()


@dataclass(frozen=True)
class ManifestEntry:
    """Pairs an original image with its adversarial variants and shared annotation."""

    original: str
    adversarial: tuple[str, ...]
    annotation: GroundTruthAnnotation


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    entries: tuple[ManifestEntry, ...] = ()


@dataclass(frozen=True)
class ImageMetrics:
    """Per-image evaluation row; ``None`` marks a metric that is undefined there."""

    mean_ap: float | None = None
    vr: float | None = None
    se: float | None = None
    mi: float | None = None
    tv: float | None = None
    ps: float | None = None


@dataclass(frozen=True)
class EvaluationRun:
    """One model/dataset evaluation, keyed by image id; the unit the stats battery compares."""

    model_id: str
    dataset_id: str
    dropout_rate: float
    per_image: dict[str, ImageMetrics] = field(default_factory=dict)


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dump(dump: PredictionDump) -> ValidationResult:
    """Check a dump against the wire-format invariants.

    Returns the full list of violations (empty means the dump is clean).
    Checks: num_passes >= 1, dropout_rate in (0, 1), per-detection box
    validity, softmax validity (entries in [0, 1], sum within 1e-6 of 1),
    and pass_index within [0, num_passes).
    """
    violations: list[str] = []
    if not dump.image_id:
        violations.append("image_id is empty")
    if dump.num_passes < 1:
        violations.append(f"T must be >= 1 (got {dump.num_passes})")
    if not (math.isfinite(dump.dropout_rate) and 0.0 < dump.dropout_rate < 1.0):
        violations.append(f"dropout_rate {dump.dropout_rate!r} outside (0, 1)")
    for i, det in enumerate(dump.detections):
        if not det.box.is_valid():
            violations.append(f"detection {i}: degenerate box {det.box.as_tuple()}")
        if not det.score.is_valid():
            s = sum(det.score.probabilities) if det.score.probabilities else float("nan")
            if det.score.probabilities and all(
                math.isfinite(v) and 0.0 <= v <= 1.0 for v in det.score.probabilities
            ):
                violations.append(f"detection {i}: softmax sum != 1 (got {s:.8g})")
            else:
                violations.append(f"detection {i}: softmax entries outside [0, 1]")
        if not (0 <= det.pass_index < dump.num_passes):
            violations.append(
                f"detection {i}: pass_index {det.pass_index} outside [0, {dump.num_passes})"
            )
    return ValidationResult(tuple(violations))
