from dataclasses import dataclass

import numpy as np

from utils.exceptions import ConfigError, DomainError

WINDOW_CHOICES = ("hann_sqrt", "hann", "rect")


@dataclass(frozen=True)
class StftConfig:
    """
    Framing of the audio front/back end.

    Defaults: 25 ms frames, 6.25 ms hop at 16 kHz, sqrt-Hann on both sides, centered
    frames (reflect padding by win_len // 2) and a 0.3 power-law magnitude compression.
    """
    n_fft: int = 400
    hop: int = 100
    win_len: int = 400
    window: str = "hann_sqrt"
    center_pad: bool = True
    compression_exponent: float = 0.3

    def __post_init__(self):
        if self.window not in WINDOW_CHOICES:
            raise ConfigError(f"window must be one of {WINDOW_CHOICES}, got {self.window!r}")
        if not (0 < self.hop <= self.win_len <= self.n_fft):
            raise ConfigError(
                f"need 0 < hop <= win_len <= n_fft, got hop={self.hop} win_len={self.win_len} n_fft={self.n_fft}"
            )
        if not (0.0 < self.compression_exponent <= 1.0):
            raise ConfigError(f"compression_exponent must lie in (0, 1], got {self.compression_exponent}")

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def pad(self) -> int:
        return self.win_len // 2 if self.center_pad else 0

    def to_dict(self) -> dict:
        return {
            "n_fft": self.n_fft,
            "hop": self.hop,
            "win_len": self.win_len,
            "window": self.window,
            "center_pad": self.center_pad,
            "compression_exponent": self.compression_exponent,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StftConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown stft config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise DomainError(f"audio must be mono (1-D), got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise DomainError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise DomainError("audio contains NaN or Inf samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Complex T x F grid stored as separate real and imaginary parts."""
    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self):
        real = np.asarray(self.real, dtype=np.float64)
        imag = np.asarray(self.imag, dtype=np.float64)
        if real.shape != imag.shape or real.ndim != 2:
            raise DomainError(f"real/imag must be equal 2-D grids, got {real.shape} and {imag.shape}")
        if not (np.all(np.isfinite(real)) and np.all(np.isfinite(imag))):
            raise DomainError("spectrogram contains NaN or Inf")
        object.__setattr__(self, "real", real)
        object.__setattr__(self, "imag", imag)

    @property
    def frames(self) -> int:
        return self.real.shape[0]

    @property
    def bins(self) -> int:
        return self.real.shape[1]

    @property
    def shape(self):
        return self.real.shape

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.real, self.imag)

    @property
    def phase(self) -> np.ndarray:
        return wrap_phase(np.arctan2(self.imag, self.real))

    @classmethod
    def from_polar(cls, magnitude, phase) -> "Spectrogram":
        return cls(magnitude * np.cos(phase), magnitude * np.sin(phase))


def wrap_phase(phase):
    """Maps angles onto (-pi, pi]; atan2 can return exactly -pi for a negative-zero imaginary part."""
    phase = np.asarray(phase, dtype=np.float64)
    return np.where(phase <= -np.pi, phase + 2.0 * np.pi, phase)
