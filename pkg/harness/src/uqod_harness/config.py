"""Harness configuration records and their validation."""

from __future__ import annotations

from dataclasses import dataclass, field

DAG_POLICIES = ("random", "background", "other")


@dataclass(frozen=True)
class ToyModelSpec:
    """Parameters of the hand-weighted cell detector.

    The detector scores each grid cell from its channel means, so the knobs
    here are the margin scale of the two color projections, the redundancy
    factor the dropout mask acts on, and the logit offsets that pit the
    foreground classes against the constant background logit.
    """

    n_copies: int = 8
    margin_scale: float = 14.0
    foreground_bias: float = -3.0
    background_bias: float = 1.0
    score_threshold: float = 0.5

    def validate(self) -> None:
        if self.n_copies < 1:
            raise ValueError(f"n_copies must be >= 1 (got {self.n_copies})")
        if not self.margin_scale > 0:
            raise ValueError(f"margin_scale must be positive (got {self.margin_scale})")
        if not 0.0 <= self.score_threshold < 1.0:
            raise ValueError(
                f"score_threshold must be in [0, 1) (got {self.score_threshold})"
            )


@dataclass(frozen=True)
class DagConfig:
    """Attack budget and target-label policy.

    step_size and epsilon are in image units (pixel value / 255). The
    defaults are harness choices, not reconstructions of anything.
    """

    max_iterations: int = 150
    step_size: float = 1 / 255
    epsilon: float = 8 / 255
    target_policy: str = "random"

    def validate(self) -> None:
        if self.max_iterations < 0:
            raise ValueError(f"max_iterations must be >= 0 (got {self.max_iterations})")
        if not self.step_size > 0:
            raise ValueError(f"step_size must be positive (got {self.step_size})")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive (got {self.epsilon})")
        if self.target_policy not in DAG_POLICIES:
            raise ValueError(
                f"target_policy must be one of {DAG_POLICIES} (got {self.target_policy!r})"
            )


@dataclass(frozen=True)
class HarnessConfig:
    """Everything one prediction or attack run needs.

    dropout_rate 0.0 switches dropout off entirely, which makes the T passes
    identical; note the shared dump format requires a rate strictly inside
    (0, 1), so schema-valid dumps need a positive rate.
    """

    images: tuple[str, ...] = ()
    out_dir: str = "."
    dropout_rate: float = 0.25
    num_passes: int = 20
    rng_seed: int = 0
    runs_per_image: int = 10
    model: ToyModelSpec = field(default_factory=ToyModelSpec)
    dag: DagConfig = field(default_factory=DagConfig)

    def validate(self) -> None:
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(
                f"dropout_rate must be in [0, 1) (got {self.dropout_rate})"
            )
        if self.num_passes < 1:
            raise ValueError(f"num_passes must be >= 1 (got {self.num_passes})")
        if self.runs_per_image < 1:
            raise ValueError(f"runs_per_image must be >= 1 (got {self.runs_per_image})")
        self.model.validate()
        self.dag.validate()


def derive_seed(base: int, *parts: int) -> int:
    """Stable per-stream seed from a base seed and position indices."""
    h = (base & 0xFFFFFFFFFFFFFFFF) * 0x9E3779B97F4A7C15
    for p in parts:
        h = (h ^ (p + 1)) * 0xBF58476D1CE4E5B9
        h &= 0xFFFFFFFFFFFFFFFF
    return h >> 1
