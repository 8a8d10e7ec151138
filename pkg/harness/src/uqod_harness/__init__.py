"""Toy detector harness emitting MC-dropout dumps and adversarial datasets."""

from .attack import DagResult, attack_dataset, dag_attack, targets_from_annotation
from .config import DagConfig, HarnessConfig, ToyModelSpec, derive_seed
from .images import (
    annotation_for,
    load_image_tensor,
    render_scene,
    save_image_tensor,
    write_fixture,
)
from .model import CANVAS, CELL, GRID, N_CLASSES, ToyCellDetector, build_detector, cell_box
from .predict import mc_dropout_predict, predict_image

__all__ = [name for name in dir() if not name.startswith("_")]
