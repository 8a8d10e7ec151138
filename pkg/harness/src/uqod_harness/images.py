"""Fixture image rendering and PNG round trips.

Scenes are built to the detector's geometry: each object occupies exactly
one grid cell, using a color whose projection margin sits close to the
decision boundary, so dropout produces real disagreement and a small
perturbation budget is enough to flip labels.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from uqod.types import BoundingBox, GroundTruthAnnotation, GroundTruthObject

from .model import CANVAS, CELL, GRID, cell_box

STICKER_RGB = (140, 59, 59)
LOGO_RGB = (59, 59, 140)
BACKGROUND_RGB = (59, 59, 59)
PIXEL_NOISE = 4


def render_scene(objects: list[tuple[int, int, int]], rng: np.random.Generator) -> np.ndarray:
    """Rasterize (label, row, col) objects onto a noisy gray canvas, uint8 HWC."""
    img = np.empty((CANVAS, CANVAS, 3), dtype=np.int16)
    img[:, :] = BACKGROUND_RGB
    for label, row, col in objects:
        color = STICKER_RGB if label == 0 else LOGO_RGB
        img[row * CELL : (row + 1) * CELL, col * CELL : (col + 1) * CELL] = color
    img += rng.integers(-PIXEL_NOISE, PIXEL_NOISE + 1, size=img.shape, dtype=np.int16)
    return np.clip(img, 0, 255).astype(np.uint8)


def random_objects(rng: np.random.Generator) -> list[tuple[int, int, int]]:
    n = int(rng.integers(1, 4))
    cells = rng.choice(GRID * GRID, size=n, replace=False)
    out = []
    for cell in sorted(int(c) for c in cells):
        row, col = divmod(cell, GRID)
        out.append((int(rng.integers(0, 2)), row, col))
    return out


def annotation_for(image_id: str, objects: list[tuple[int, int, int]]) -> GroundTruthAnnotation:
    return GroundTruthAnnotation(
        image_id=image_id,
        objects=tuple(
            GroundTruthObject(label=label, box=BoundingBox(*cell_box(row, col)))
            for label, row, col in objects
        ),
    )


def write_fixture(
    out_dir: str | Path, n_images: int = 5, seed: int = 0
) -> tuple[list[Path], dict[str, GroundTruthAnnotation]]:
    """Write img0001.png .. imgNNNN.png plus per-image ground truth."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    scenes: dict[str, GroundTruthAnnotation] = {}
    for i in range(n_images):
        image_id = f"img{i + 1:04d}"
        rng = np.random.default_rng([seed, i])
        objects = random_objects(rng)
        path = out_dir / f"{image_id}.png"
        Image.fromarray(render_scene(objects, rng)).save(path)
        paths.append(path)
        scenes[image_id] = annotation_for(image_id, objects)
    return paths, scenes


def load_image_tensor(path: str | Path) -> torch.Tensor:
    """PNG to a (3, CANVAS, CANVAS) float64 tensor in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    if arr.shape != (CANVAS, CANVAS, 3):
        raise ValueError(f"{path}: expected {CANVAS}x{CANVAS} RGB, got {arr.shape}")
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def save_image_tensor(x: torch.Tensor, path: str | Path) -> None:
    """Tensor back to PNG. Values on the 1/255 grid survive exactly."""
    arr = np.rint(x.detach().permute(1, 2, 0).numpy() * 255.0)
    Image.fromarray(np.clip(arr, 0, 255).astype(np.uint8)).save(path)
