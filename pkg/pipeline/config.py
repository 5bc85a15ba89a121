from dataclasses import dataclass, field
from typing import Optional

from autodiff.optim import AdamWConfig
from enhancer.config import ModelConfig
from losses.weights import LossWeights
from utils.exceptions import ConfigError


@dataclass(frozen=True)
class OptimizerSettings:
    adamw: AdamWConfig = field(default_factory=AdamWConfig)
    grad_accum: int = 2

    def __post_init__(self):
        if self.grad_accum < 1:
            raise ConfigError(f"grad_accum must be >= 1, got {self.grad_accum}")

    def to_dict(self) -> dict:
        return {**self.adamw.to_dict(), "grad_accum": self.grad_accum}


@dataclass(frozen=True)
class TrainingSettings:
    max_steps: int = 2000
    eval_every: int = 100
    seed: int = 0
    # scene whose SI-SDR is logged at eval steps; the first manifest scene when unset
    held_scene: Optional[str] = None

    def __post_init__(self):
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")

    def to_dict(self) -> dict:
        return {
            "max_steps": self.max_steps,
            "eval_every": self.eval_every,
            "seed": self.seed,
            "held_scene": self.held_scene,
        }


@dataclass(frozen=True)
class PathSettings:
    manifest: str = "data/toy/manifest.json"
    checkpoint_dir: str = "runs/toy/checkpoints"
    report_dir: str = "runs/toy/reports"

    def to_dict(self) -> dict:
        return {"manifest": self.manifest, "checkpoint_dir": self.checkpoint_dir, "report_dir": self.report_dir}


@dataclass(frozen=True)
class RunConfig:
    """Everything one toy training run needs; `to_dict` is the fully defaulted JSON document."""
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    training: TrainingSettings = field(default_factory=TrainingSettings)
    paths: PathSettings = field(default_factory=PathSettings)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "loss": self.loss.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "training": self.training.to_dict(),
            "paths": self.paths.to_dict(),
        }
