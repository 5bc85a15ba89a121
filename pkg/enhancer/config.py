from dataclasses import dataclass, field
from fractions import Fraction

from dsp.types import StftConfig
from utils.exceptions import ConfigError

MASK_ACTIVATIONS = ("bounded_sigmoid_2x",)

# largest denominator accepted for the audio-frame-rate / video-fps ratio
MAX_ALIGNMENT_DENOMINATOR = 100


@dataclass(frozen=True)
class ModelConfig:
    """
    Sizes and switches of the enhancement network.

    The defaults are the CPU-sized toy configuration. `visual_proj_dim` is the width the
    per-frame visual vector is projected to before being tiled across frequency bins;
    `front_channels` is the width of each per-stream (magnitude, phase) frontend.
    """
    stft: StftConfig = field(default_factory=StftConfig)
    sample_rate: int = 16000
    d_model: int = 32
    n_tf_blocks: int = 2
    d_state: int = 16
    d_conv: int = 4
    expand: int = 2
    front_channels: int = 8
    visual_dim: int = 64
    visual_proj_dim: int = 8
    visual_fps: int = 25
    use_visual: bool = True
    causal: bool = False
    mask_activation: str = "bounded_sigmoid_2x"
    scan_chunk: int = 32
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.stft, dict):
            object.__setattr__(self, "stft", StftConfig.from_dict(self.stft))
        positive = ("sample_rate", "d_model", "n_tf_blocks", "d_state", "d_conv", "expand", "front_channels",
                    "visual_dim", "visual_proj_dim", "visual_fps", "scan_chunk")
        for name in positive:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.mask_activation not in MASK_ACTIVATIONS:
            raise ConfigError(f"mask_activation must be one of {MASK_ACTIVATIONS}, got {self.mask_activation!r}")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigError(f"seed must fit in an unsigned 64-bit integer, got {self.seed}")
        if self.alignment_factor.denominator > MAX_ALIGNMENT_DENOMINATOR:
            raise ConfigError(
                f"audio frame rate {self.frame_rate} Hz and video rate {self.visual_fps} fps do not align "
                f"on a small rational ({self.alignment_factor})"
            )

    @property
    def frame_rate(self) -> Fraction:
        return Fraction(self.sample_rate, self.stft.hop)

    @property
    def alignment_factor(self) -> Fraction:
        """STFT frames per video frame, e.g. 32/5 for 160 Hz against 25 fps."""
        return self.frame_rate / self.visual_fps

    @property
    def n_bins(self) -> int:
        return self.stft.n_bins

    def to_dict(self) -> dict:
        return {
            "stft": self.stft.to_dict(),
            "sample_rate": self.sample_rate,
            "d_model": self.d_model,
            "n_tf_blocks": self.n_tf_blocks,
            "d_state": self.d_state,
            "d_conv": self.d_conv,
            "expand": self.expand,
            "front_channels": self.front_channels,
            "visual_dim": self.visual_dim,
            "visual_proj_dim": self.visual_proj_dim,
            "visual_fps": self.visual_fps,
            "use_visual": self.use_visual,
            "causal": self.causal,
            "mask_activation": self.mask_activation,
            "scan_chunk": self.scan_chunk,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**data)
