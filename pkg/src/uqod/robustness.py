"""Robustness scores: how far a metric moves under adversarial variants.

Every score starts from the same two aggregates over an original value v_X
and its m adversarial counterparts v_i:

    avg  = (v_X + sum_i v_i) / (m + 1)
    diff = sum_i |v_X - v_i| / m

For accuracy (mAP, higher is better) the score rewards a high stable value:
RS = avg - diff. For the uncertainty metrics (lower is better) it rewards a
low stable value: RS = 1 - (avg + diff). The image-level uncertainty
robustness RS_uq is the unweighted mean of the five per-metric scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

UQ_METRIC_NAMES = ("vr", "se", "mi", "tv", "ps")


@dataclass(frozen=True)
class PairedMetrics:
    """One metric's value on the original image and on each adversarial variant."""

    original: float
    adversarial: tuple[float, ...]

    def __post_init__(self):
        if len(self.adversarial) == 0:
            raise ValueError("paired metrics need at least one adversarial value")


def avg_and_diff(pair: PairedMetrics) -> tuple[float, float]:
    m = len(pair.adversarial)
    avg = (pair.original + sum(pair.adversarial)) / (m + 1)
    diff = sum(abs(pair.original - v) for v in pair.adversarial) / m
    return avg, diff


def rs_map(pair: PairedMetrics) -> float:
    """Robustness of an accuracy value: avg - diff."""
    avg, diff = avg_and_diff(pair)
    return avg - diff


def rs_uqm(pair: PairedMetrics) -> float:
    """Robustness of an uncertainty value: 1 - (avg + diff)."""
    avg, diff = avg_and_diff(pair)
    return 1.0 - (avg + diff)


def rs_uq(per_metric: Mapping[str, float]) -> float:
    """Mean of the five per-metric uncertainty robustness scores."""
    missing = [name for name in UQ_METRIC_NAMES if name not in per_metric]
    if missing:
        raise ValueError(f"missing uncertainty metrics: {', '.join(missing)}")
    return sum(per_metric[name] for name in UQ_METRIC_NAMES) / len(UQ_METRIC_NAMES)


@dataclass(frozen=True)
class RobustnessReport:
    """Per-image robustness scores; rs_uq is None when any UQ pairing is absent."""

    image_id: str
    rs_map: float | None
    rs_per_uqm: dict[str, float | None]
    rs_uq: float | None
