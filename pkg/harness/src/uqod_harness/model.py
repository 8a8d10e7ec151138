"""A tiny hand-weighted cell detector with inference-time dropout.

The detector divides a 32x32 RGB image into a 4x4 grid of 8x8 cells and
classifies every cell as sticker, logo, or background from its channel
means. Two linear color projections carry all the signal:

    redness  = r - (g + b) / 2
    blueness = b - (r + g) / 2

Each projection is replicated n_copies times before the ReLU so that the
dropout mask thins an ensemble of identical evidence channels rather than a
single scalar; the head averages the surviving copies. That gives the
per-pass logit a binomial wobble around its deterministic value, which is
the whole point of running the model stochastically.

Weights are fixed buffers, not trainable parameters. The only gradient
consumers are attacks differentiating with respect to the input image.
"""

from __future__ import annotations

import torch
from torch import nn

from .config import ToyModelSpec

GRID = 4
CELL = 8
CANVAS = GRID * CELL
N_CLASSES = 3


def cell_box(row: int, col: int) -> tuple[float, float, float, float]:
    """Pixel-coordinate box of a grid cell."""
    return (float(col * CELL), float(row * CELL), float((col + 1) * CELL), float((row + 1) * CELL))


class ToyCellDetector(nn.Module):
    def __init__(self, spec: ToyModelSpec | None = None, dropout_rate: float = 0.25):
        super().__init__()
        spec = spec or ToyModelSpec()
        spec.validate()
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1) (got {dropout_rate})")
        self.spec = spec
        self.dropout_rate = dropout_rate
        k = spec.n_copies

        proj = torch.zeros((2 * k, 3), dtype=torch.float64)
        proj[:k] = torch.tensor([1.0, -0.5, -0.5], dtype=torch.float64)
        proj[k:] = torch.tensor([-0.5, -0.5, 1.0], dtype=torch.float64)

        head = torch.zeros((N_CLASSES, 2 * k), dtype=torch.float64)
        head[0, :k] = spec.margin_scale / k
        head[1, k:] = spec.margin_scale / k

        bias = torch.tensor(
            [spec.foreground_bias, spec.foreground_bias, spec.background_bias],
            dtype=torch.float64,
        )
        self.register_buffer("proj", proj)
        self.register_buffer("head", head)
        self.register_buffer("bias", bias)

    def cell_logits(self, x: torch.Tensor, rng: torch.Generator | None = None) -> torch.Tensor:
        """Per-cell class logits, shape (GRID*GRID, 3).

        x is a (3, CANVAS, CANVAS) image in [0, 1]. Passing an rng draws a
        fresh dropout mask over the evidence copies; without one the model
        is deterministic.
        """
        if x.shape != (3, CANVAS, CANVAS):
            raise ValueError(f"expected (3, {CANVAS}, {CANVAS}) image, got {tuple(x.shape)}")
        pooled = torch.nn.functional.avg_pool2d(x.unsqueeze(0), CELL)[0]
        feats = pooled.permute(1, 2, 0).reshape(GRID * GRID, 3)
        h = torch.relu(feats @ self.proj.T)
        if rng is not None and self.dropout_rate > 0.0:
            keep = 1.0 - self.dropout_rate
            mask = (
                torch.rand(h.shape, generator=rng, dtype=torch.float64) < keep
            ).to(torch.float64)
            h = h * mask / keep
        return h @ self.head.T + self.bias

    def forward(self, x: torch.Tensor, rng: torch.Generator | None = None) -> torch.Tensor:
        return torch.softmax(self.cell_logits(x, rng), dim=1)

    def detect(
        self, x: torch.Tensor, rng: torch.Generator | None = None
    ) -> list[tuple[tuple[float, float, float, float], tuple[float, ...]]]:
        """One forward pass reduced to (box, softmax) detections.

        A cell is emitted when its argmax class is foreground and the top
        probability clears the score threshold. Cells come out row-major, so
        detection order is stable for a fixed mask.
        """
        probs = self.forward(x, rng)
        out = []
        for idx in range(GRID * GRID):
            p = probs[idx]
            label = int(torch.argmax(p))
            if label == N_CLASSES - 1:
                continue
            if float(p[label]) < self.spec.score_threshold:
                continue
            row, col = divmod(idx, GRID)
            out.append((cell_box(row, col), tuple(float(v) for v in p)))
        return out


def build_detector(spec: ToyModelSpec | None = None, dropout_rate: float = 0.25) -> ToyCellDetector:
    """Construct the detector, surfacing bad specs as ValueError."""
    return ToyCellDetector(spec, dropout_rate)
