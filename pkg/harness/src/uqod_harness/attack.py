"""Targeted gradient attack that drives every ground-truth object off its label.

The attack does sign-of-gradient ascent on the summed margins between a per
target adversarial label and the true label, projecting onto an infinity-norm
ball around the clean image after every step. Targets that are already
mispredicted drop out of the loss, and the loop stops as soon as none are
left; success is judged afterwards by a fresh deterministic forward pass.

All arithmetic stays on the 1/255 pixel grid (the random start is quantized,
the step size and ball radius are multiples of 1/255 by default), so writing
the result to a PNG and reading it back reproduces the exact tensor the
success check saw.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from uqod.io import write_manifest
from uqod.types import DatasetManifest, GroundTruthAnnotation, ManifestEntry

from .config import DagConfig, HarnessConfig, derive_seed
from .images import load_image_tensor, save_image_tensor
from .model import CELL, GRID, N_CLASSES, build_detector

BACKGROUND = N_CLASSES - 1


@dataclass(frozen=True)
class DagResult:
    image: torch.Tensor
    success: bool
    iterations: int
    linf: float


def targets_from_annotation(annotation: GroundTruthAnnotation) -> list[tuple[int, int]]:
    """(cell index, true label) pairs for every annotated object."""
    out = []
    for obj in annotation.objects:
        row = int(obj.box.y1 // CELL)
        col = int(obj.box.x1 // CELL)
        out.append((row * GRID + col, obj.label))
    return out


def _pick_adversarial_labels(
    targets: list[tuple[int, int]], policy: str, rng: torch.Generator
) -> list[int]:
    labels = []
    for _, gt in targets:
        if policy == "background":
            labels.append(BACKGROUND)
        elif policy == "other":
            labels.append(1 - gt if gt in (0, 1) else 0)
        else:
            options = [c for c in range(N_CLASSES) if c != gt]
            pick = int(torch.randint(len(options), (1,), generator=rng))
            labels.append(options[pick])
    return labels


def _quantize(x: torch.Tensor) -> torch.Tensor:
    return torch.round(x * 255.0) / 255.0


def dag_attack(
    model: nn.Module,
    image: torch.Tensor,
    targets: list[tuple[int, int]],
    config: DagConfig,
    rng: torch.Generator,
) -> DagResult:
    """Perturb image until every target's predicted label differs from truth.

    A zero iteration budget returns the image untouched. The seed feeds the
    random start inside half the ball and, under the random policy, the per
    target adversarial label choice.
    """
    if not isinstance(model, nn.Module):
        raise TypeError("model must be a torch.nn.Module; gradients are required")
    config.validate()
    if not targets:
        raise ValueError("no targets to attack")

    x0 = image.detach().clone()
    x = x0.clone()
    adv_labels = _pick_adversarial_labels(targets, config.target_policy, rng)

    if config.max_iterations > 0:
        start = torch.empty_like(x0).uniform_(
            -config.epsilon / 2, config.epsilon / 2, generator=rng
        )
        x = (x0 + _quantize(start)).clamp(0.0, 1.0)

    lo = (x0 - config.epsilon).clamp(0.0, 1.0)
    hi = (x0 + config.epsilon).clamp(0.0, 1.0)
    iterations = 0
    for _ in range(config.max_iterations):
        with torch.no_grad():
            preds = torch.argmax(model.cell_logits(x), dim=1)
        active = [k for k, (cell, gt) in enumerate(targets) if int(preds[cell]) == gt]
        if not active:
            break
        iterations += 1
        leaf = x.detach().requires_grad_(True)
        logits = model.cell_logits(leaf)
        loss = sum(
            logits[targets[k][0], adv_labels[k]] - logits[targets[k][0], targets[k][1]]
            for k in active
        )
        loss.backward()
        with torch.no_grad():
            x = leaf + config.step_size * leaf.grad.sign()
            x = torch.max(torch.min(x, hi), lo)
    x = x.detach()

    with torch.no_grad():
        preds = torch.argmax(model.cell_logits(x), dim=1)
    success = all(int(preds[cell]) != gt for cell, gt in targets)
    linf = float((x - x0).abs().max()) if targets else 0.0
    return DagResult(image=x, success=success, iterations=iterations, linf=linf)


def attack_dataset(
    config: HarnessConfig, scenes: dict[str, GroundTruthAnnotation]
) -> tuple[Path, dict]:
    """Attack every configured image runs_per_image times with distinct seeds.

    Writes the original and perturbed PNGs under out_dir/images, a dataset
    manifest pairing them, and a JSON report with per-variant success flags,
    iteration counts, and perturbation norms. Variants are emitted whether or
    not they succeeded; the report is the place to check.
    """
    config.validate()
    if not config.images:
        raise ValueError("no input images configured")
    model = build_detector(config.model, dropout_rate=0.0)
    out_images = Path(config.out_dir) / "images"
    out_images.mkdir(parents=True, exist_ok=True)

    entries: list[ManifestEntry] = []
    report: dict[str, dict] = {}
    for idx, image_path in enumerate(sorted(config.images, key=lambda p: Path(p).stem)):
        image_id = Path(image_path).stem
        if image_id not in scenes:
            raise ValueError(f"no ground truth for image {image_id!r}")
        annotation = scenes[image_id]
        targets = targets_from_annotation(annotation)
        x0 = load_image_tensor(image_path)
        shutil.copy(image_path, out_images / f"{image_id}.png")

        adv_ids = []
        for j in range(config.runs_per_image):
            rng = torch.Generator()
            rng.manual_seed(derive_seed(config.rng_seed, idx, j))
            result = dag_attack(model, x0, targets, config.dag, rng)
            adv_id = f"{image_id}_adv{j:02d}"
            save_image_tensor(result.image, out_images / f"{adv_id}.png")
            adv_ids.append(adv_id)
            report[adv_id] = {
                "success": result.success,
                "iterations": result.iterations,
                "linf": result.linf,
            }
        entries.append(
            ManifestEntry(original=image_id, adversarial=tuple(adv_ids), annotation=annotation)
        )

    manifest = DatasetManifest(name=f"harness-{config.rng_seed}", entries=tuple(entries))
    manifest_path = Path(config.out_dir) / "manifest.json"
    write_manifest(manifest, manifest_path)
    report_path = Path(config.out_dir) / "attack_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
    return manifest_path, report
