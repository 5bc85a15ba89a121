import numpy as np

from dsp.types import AudioBuffer, StftConfig
from enhancer.config import ModelConfig


def tiny_config(**overrides) -> ModelConfig:
    values = dict(
        stft=StftConfig(n_fft=64, win_len=64, hop=16),
        d_model=8,
        n_tf_blocks=1,
        d_state=4,
        front_channels=2,
        visual_dim=6,
        visual_proj_dim=3,
        scan_chunk=8,
        seed=3,
    )
    values.update(overrides)
    return ModelConfig(**values)


def noise(n_samples: int, seed: int = 0, scale: float = 0.1) -> AudioBuffer:
    return AudioBuffer(np.random.default_rng(seed).normal(scale=scale, size=n_samples), 16000)
