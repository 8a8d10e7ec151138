"""Synthetic detector simulator: plants scenes, emits noisy prediction dumps.

Every image gets a planted set of ground-truth objects; the simulated
detector then "sees" each object once per stochastic pass, with four noise
knobs:

* ``detect_drop_prob``: the object is missing from a pass entirely;
* ``box_jitter_sigma``: Gaussian noise on each box corner (corners are
  reordered afterwards so boxes stay well-formed);
* ``label_flip_prob``: the pass reports a different class;
* ``softmax_temperature``: 0 gives exact one-hot scores, larger values give
  flatter, pass-varying softmax vectors.

Adversarial variants re-emit the same scene with the degradation added on
top of the base noise. All randomness flows from numpy's PCG64 generator,
seeded per (rng_seed, image index, variant), so generation is reproducible
byte for byte and independent of image processing order. Streams draw the
same number of variates regardless of knob values, so two configs that
differ in one knob stay aligned everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as uio
from .types import (
    BoundingBox,
    DatasetManifest,
    Detection,
    GroundTruthAnnotation,
    GroundTruthObject,
    ManifestEntry,
    PredictionDump,
    SoftmaxScore,
)

NUM_CLASSES = 3  # two foreground classes carry ground truth; the third is background

# nominal rate recorded in emitted dumps (the simulator has no real dropout layer)
NOMINAL_DROPOUT_RATE = 0.25


@dataclass(frozen=True)
class AdversarialDegradation:
    extra_jitter: float = 0.0
    extra_flip: float = 0.0


@dataclass(frozen=True)
class SynthConfig:
    n_images: int = 50
    objects_per_image: tuple[int, int] = (1, 4)
    num_passes: int = 20
    box_jitter_sigma: float = 0.0
    label_flip_prob: float = 0.0
    softmax_temperature: float = 0.0
    detect_drop_prob: float = 0.0
    adversarial_degradation: AdversarialDegradation = AdversarialDegradation()
    rng_seed: int = 0
    n_adversarial: int = 10
    canvas_size: tuple[int, int] = (640, 480)
    box_size_range: tuple[float, float] = (40.0, 80.0)
    min_center_separation: float = 150.0

    def __post_init__(self):
        if self.n_images < 1:
            raise ValueError("n_images must be >= 1")
        if self.num_passes < 1:
            raise ValueError("num_passes must be >= 1")
        lo, hi = self.objects_per_image
        if lo < 1 or hi < lo:
            raise ValueError("objects_per_image must be a range with 1 <= lo <= hi")
        if self.box_jitter_sigma < 0 or self.detect_drop_prob < 0 or self.label_flip_prob < 0:
            raise ValueError("noise knobs must be non-negative")
        if self.softmax_temperature < 0:
            raise ValueError("softmax_temperature must be >= 0")
        if self.n_adversarial < 0:
            raise ValueError("n_adversarial must be >= 0")


def config_from_obj(obj: dict) -> SynthConfig:
    kwargs = dict(obj)
    if "adversarial_degradation" in kwargs and isinstance(kwargs["adversarial_degradation"], dict):
        kwargs["adversarial_degradation"] = AdversarialDegradation(
            **kwargs["adversarial_degradation"]
        )
    for key in ("objects_per_image", "canvas_size", "box_size_range"):
        if key in kwargs and isinstance(kwargs[key], list):
            kwargs[key] = tuple(kwargs[key])
    return SynthConfig(**kwargs)


def _plant_scene(config: SynthConfig, image_index: int) -> tuple[GroundTruthObject, ...]:
    rng = np.random.default_rng([config.rng_seed, image_index, 0])
    lo, hi = config.objects_per_image
    n_obj = int(rng.integers(lo, hi + 1))
    cw, ch = config.canvas_size
    objects: list[GroundTruthObject] = []
    centers: list[tuple[float, float]] = []
    for _ in range(n_obj):
        w = float(rng.uniform(*config.box_size_range))
        h = float(rng.uniform(*config.box_size_range))
        cx = cy = 0.0
        for _attempt in range(200):
            cx = float(rng.uniform(w / 2, cw - w / 2))
            cy = float(rng.uniform(h / 2, ch - h / 2))
            if all(
                (cx - ox) ** 2 + (cy - oy) ** 2 >= config.min_center_separation**2
                for ox, oy in centers
            ):
                break
        centers.append((cx, cy))
        label = int(rng.integers(0, 2))
        objects.append(
            GroundTruthObject(
                label=label,
                box=BoundingBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2),
            )
        )
    return tuple(objects)


def _emit_softmax(label: int, temperature: float, eta: np.ndarray) -> SoftmaxScore:
    if temperature == 0.0:
        probs = [0.0] * NUM_CLASSES
        probs[label] = 1.0
        return SoftmaxScore(tuple(probs))
    logits = eta.astype(float).copy()
    logits[label] += 1.0 / temperature
    logits -= logits.max()
    exp = np.exp(logits)
    p = exp / exp.sum()
    return SoftmaxScore(tuple(float(v) for v in p))


def _emit_dump(
    image_id: str,
    scene: tuple[GroundTruthObject, ...],
    config: SynthConfig,
    jitter: float,
    flip_prob: float,
    rng: np.random.Generator,
) -> PredictionDump:
    detections: list[Detection] = []
    for pass_index in range(config.num_passes):
        for obj in scene:
            u_drop = float(rng.random())
            eps = rng.normal(0.0, 1.0, size=4)
            u_flip = float(rng.random())
            flip_pick = int(rng.integers(0, NUM_CLASSES - 1))
            eta = rng.normal(0.0, 1.0, size=NUM_CLASSES)
            if u_drop < config.detect_drop_prob:
                continue
            corners = np.asarray(obj.box.as_tuple(), dtype=float) + jitter * eps
            x1, x2 = sorted((corners[0], corners[2]))
            y1, y2 = sorted((corners[1], corners[3]))
            label = obj.label
            if u_flip < flip_prob:
                others = [c for c in range(NUM_CLASSES) if c != obj.label]
                label = others[flip_pick]
            detections.append(
                Detection(
                    box=BoundingBox(float(x1), float(y1), float(x2), float(y2)),
                    score=_emit_softmax(label, config.softmax_temperature, eta),
                    pass_index=pass_index,
                )
            )
    return PredictionDump(
        image_id=image_id,
        num_passes=config.num_passes,
        dropout_rate=NOMINAL_DROPOUT_RATE,
        detections=tuple(detections),
    )


def generate(config: SynthConfig) -> tuple[DatasetManifest, list[PredictionDump]]:
    """Build the manifest and all dumps (original plus adversarial variants)."""
    entries: list[ManifestEntry] = []
    dumps: list[PredictionDump] = []
    degr = config.adversarial_degradation
    for i in range(config.n_images):
        image_id = f"img{i:04d}"
        scene = _plant_scene(config, i)
        annotation = GroundTruthAnnotation(image_id=image_id, objects=scene)
        dumps.append(
            _emit_dump(
                image_id,
                scene,
                config,
                jitter=config.box_jitter_sigma,
                flip_prob=config.label_flip_prob,
                rng=np.random.default_rng([config.rng_seed, i, 1]),
            )
        )
        adv_ids: list[str] = []
        for j in range(config.n_adversarial):
            adv_id = f"{image_id}_adv{j:02d}"
            adv_ids.append(adv_id)
            dumps.append(
                _emit_dump(
                    adv_id,
                    scene,
                    config,
                    jitter=config.box_jitter_sigma + degr.extra_jitter,
                    flip_prob=config.label_flip_prob + degr.extra_flip,
                    rng=np.random.default_rng([config.rng_seed, i, 2 + j]),
                )
            )
        entries.append(
            ManifestEntry(original=image_id, adversarial=tuple(adv_ids), annotation=annotation)
        )
    manifest = DatasetManifest(name=f"synth-{config.rng_seed}", entries=tuple(entries))
    return manifest, dumps


def write_dataset(config: SynthConfig, out_dir: str | Path) -> Path:
    """Generate and write manifest.json plus a dumps/ directory; returns the manifest path."""
    out = Path(out_dir)
    dumps_dir = out / "dumps"
    dumps_dir.mkdir(parents=True, exist_ok=True)
    manifest, dumps = generate(config)
    manifest_path = out / "manifest.json"
    uio.write_manifest(manifest, manifest_path)
    for dump in dumps:
        uio.write_dump(dump, dumps_dir / f"{dump.image_id}.json")
    return manifest_path
