"""MC-dropout inference: run T stochastic passes and serialize dumps."""

from __future__ import annotations

from pathlib import Path

import torch

from uqod.io import write_dump
from uqod.types import BoundingBox, Detection, PredictionDump, SoftmaxScore

from .config import HarnessConfig, derive_seed
from .images import load_image_tensor
from .model import ToyCellDetector, build_detector


def predict_image(
    model: ToyCellDetector,
    x: torch.Tensor,
    image_id: str,
    num_passes: int,
    rng: torch.Generator | None,
) -> PredictionDump:
    """Collect detections from num_passes stochastic forward passes.

    The same generator is threaded through all passes, so a fixed seed fixes
    the whole dump. With dropout disabled every pass is identical.
    """
    detections: list[Detection] = []
    for t in range(num_passes):
        for box, probs in model.detect(x, rng):
            detections.append(
                Detection(box=BoundingBox(*box), score=SoftmaxScore(probs), pass_index=t)
            )
    return PredictionDump(
        image_id=image_id,
        num_passes=num_passes,
        dropout_rate=model.dropout_rate,
        detections=tuple(detections),
    )


def mc_dropout_predict(config: HarnessConfig) -> list[Path]:
    """Write one dump per configured image; returns the paths written."""
    config.validate()
    if not config.images:
        raise ValueError("no input images configured")
    model = build_detector(config.model, config.dropout_rate)
    dumps_dir = Path(config.out_dir) / "dumps"
    dumps_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for idx, image_path in enumerate(config.images):
        x = load_image_tensor(image_path)
        image_id = Path(image_path).stem
        rng: torch.Generator | None = None
        if config.dropout_rate > 0.0:
            rng = torch.Generator()
            rng.manual_seed(derive_seed(config.rng_seed, idx))
        dump = predict_image(model, x, image_id, config.num_passes, rng)
        path = dumps_dir / f"{image_id}.json"
        write_dump(dump, path)
        written.append(path)
    return written
