from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from utils.exceptions import ConfigError, ShapeError
from .tensor import Tensor


@dataclass(frozen=True)
class AdamWConfig:
    lr: float = 5e-4
    betas: Tuple[float, float] = (0.9, 0.99)
    eps: float = 1e-8
    weight_decay: float = 1e-2

    def __post_init__(self):
        beta1, beta2 = self.betas
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError(f"betas must lie in [0, 1), got {self.betas}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")

    def to_dict(self) -> dict:
        return {"lr": self.lr, "betas": list(self.betas), "eps": self.eps, "weight_decay": self.weight_decay}


@dataclass
class AdamWState:
    """First/second moments per parameter name plus the shared step counter."""
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(params: Dict[str, Tensor], grads: Dict[str, np.ndarray], state: AdamWState,
               cfg: AdamWConfig = AdamWConfig()):
    """
    One decoupled-weight-decay Adam update, applied in place to every parameter.

    Parameters without a gradient entry are updated with a zero gradient (their
    moments still decay and weight decay still applies).

    Returns:
        (params, state): the same parameter mapping and the advanced optimizer state.
    """
    beta1, beta2 = cfg.betas
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step

    for name, param in params.items():
        grad = grads.get(name)
        grad = np.zeros_like(param.data) if grad is None else np.asarray(grad, dtype=param.dtype)
        if grad.shape != param.shape:
            raise ShapeError(f"gradient for {name} has shape {grad.shape}, parameter {param.shape}")

        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        state.m[name] = m
        state.v[name] = v

        decayed = param.data * (1.0 - cfg.lr * cfg.weight_decay)
        update = (m / correction1) / (np.sqrt(v / correction2) + cfg.eps)
        param.data = decayed - cfg.lr * update

    return params, state
