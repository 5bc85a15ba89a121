"""
STFT and inverse STFT as autodiff graphs.

Framing is the same gather as dsp.stft.frame_indices; the DFT is a matmul against a
window-folded cosine/sine basis and synthesis is a scatter-add overlap-add scaled by the
constant inverse window envelope. Both agree with the numpy transforms to rounding error.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor, as_tensor
from utils.exceptions import ConfigError, EmptyInput, ShapeError
from .stft import ENVELOPE_FLOOR, analysis_window, frame_indices, ola_envelope, padded_length, synthesis_window
from .types import Spectrogram, StftConfig

# magnitude floor inside the square root so d|X| stays finite at X = 0
MAGNITUDE_EPS = 1e-12


@dataclass(eq=False)
class TensorSpectrogram:
    """
    Real/imaginary tensors of a T x F spectrogram.

    When the grid was built from polar parts, `compressed_mag` and `phase` keep those
    tensors so losses can use them without going back through sqrt/atan2.
    """
    real: Tensor
    imag: Tensor
    compressed_mag: Optional[Tensor] = None
    phase: Optional[Tensor] = None

    def __post_init__(self):
        self.real = as_tensor(self.real)
        self.imag = as_tensor(self.imag)
        if self.real.shape != self.imag.shape or self.real.ndim != 2:
            raise ShapeError(f"real/imag must be equal 2-D grids, got {self.real.shape} and {self.imag.shape}")

    @property
    def shape(self):
        return self.real.shape

    @property
    def frames(self) -> int:
        return self.real.shape[0]

    @property
    def bins(self) -> int:
        return self.real.shape[1]

    def detach(self) -> Spectrogram:
        return Spectrogram(self.real.data, self.imag.data)

    @classmethod
    def constant(cls, spec: Spectrogram) -> "TensorSpectrogram":
        return cls(Tensor(spec.real), Tensor(spec.imag))


@lru_cache(maxsize=16)
def _analysis_basis(cfg: StftConfig):
    n = np.arange(cfg.win_len)[:, None]
    k = np.arange(cfg.n_bins)[None, :]
    angle = 2.0 * np.pi * k * n / cfg.n_fft
    window = analysis_window(cfg)[:, None]
    cos_basis, sin_basis = window * np.cos(angle), -window * np.sin(angle)
    cos_basis.setflags(write=False)
    sin_basis.setflags(write=False)
    return cos_basis, sin_basis


@lru_cache(maxsize=16)
def _synthesis_basis(cfg: StftConfig):
    k = np.arange(cfg.n_bins)[:, None]
    n = np.arange(cfg.win_len)[None, :]
    angle = 2.0 * np.pi * k * n / cfg.n_fft
    # one-sided spectrum: interior bins count twice, DC (and Nyquist for even n_fft) once
    weight = np.full((cfg.n_bins, 1), 2.0)
    weight[0] = 1.0
    if cfg.n_fft % 2 == 0:
        weight[-1] = 1.0
    scale = weight / cfg.n_fft * synthesis_window(cfg)[None, :]
    cos_basis, sin_basis = scale * np.cos(angle), -scale * np.sin(angle)
    cos_basis.setflags(write=False)
    sin_basis.setflags(write=False)
    return cos_basis, sin_basis


def stft_tensor(x, cfg: StftConfig) -> TensorSpectrogram:
    """Differentiable counterpart of dsp.stft.stft for a 1-D waveform tensor."""
    x = as_tensor(x)
    if x.ndim != 1:
        raise ShapeError(f"stft_tensor expects a 1-D waveform, got {x.shape}")
    if x.shape[0] == 0:
        raise EmptyInput("cannot transform an empty waveform")
    idx = frame_indices(x.shape[0], cfg)
    if idx.shape[0] == 0:
        raise EmptyInput(f"{x.shape[0]} samples are too few for a single {cfg.win_len}-sample frame")
    frames = ops.take(x, idx)
    cos_basis, sin_basis = _analysis_basis(cfg)
    return TensorSpectrogram(ops.matmul(frames, cos_basis), ops.matmul(frames, sin_basis))


def overlap_add_tensor(spec: TensorSpectrogram, cfg: StftConfig, length: Optional[int] = None) -> Tensor:
    """
    Envelope-normalized overlap-add in padded coordinates (sample 0 is where frame 0 starts).

    `length` defaults to the span of the frames, padded_length(T); samples no frame covers are zero.
    """
    if spec.bins != cfg.n_bins:
        raise ConfigError(f"spectrogram has {spec.bins} bins, config expects {cfg.n_bins}")
    cos_basis, sin_basis = _synthesis_basis(cfg)
    frames = ops.add(ops.matmul(spec.real, cos_basis), ops.matmul(spec.imag, sin_basis))

    n_frames = spec.frames
    length = padded_length(n_frames, cfg) if length is None else length
    positions = np.arange(n_frames)[:, None] * cfg.hop + np.arange(cfg.win_len)[None, :]
    signal = ops.scatter_add(frames, positions, length)

    envelope = ola_envelope(n_frames, cfg, length)
    covered = envelope > ENVELOPE_FLOOR
    inverse = np.where(covered, 1.0 / np.where(covered, envelope, 1.0), 0.0)
    return ops.mul(signal, inverse)


def istft_tensor(spec: TensorSpectrogram, cfg: StftConfig, out_len: int) -> Tensor:
    """Differentiable counterpart of dsp.stft.istft; returns exactly `out_len` samples."""
    if out_len < 0:
        raise ConfigError(f"out_len must be >= 0, got {out_len}")
    length = max(padded_length(spec.frames, cfg), cfg.pad + out_len)
    return overlap_add_tensor(spec, cfg, length)[cfg.pad:cfg.pad + out_len]


def frames_tensor(padded, cfg: StftConfig) -> TensorSpectrogram:
    """
    Analysis of a signal already in padded coordinates: plain framing at multiples of hop,
    no reflection. Inverse of overlap_add_tensor on every spectrogram some signal produces.
    """
    padded = as_tensor(padded)
    if padded.ndim != 1 or padded.shape[0] < cfg.win_len:
        raise ShapeError(f"need a 1-D signal of at least {cfg.win_len} samples, got {padded.shape}")
    n_frames = 1 + (padded.shape[0] - cfg.win_len) // cfg.hop
    positions = np.arange(n_frames)[:, None] * cfg.hop + np.arange(cfg.win_len)[None, :]
    frames = ops.take(padded, positions)
    cos_basis, sin_basis = _analysis_basis(cfg)
    return TensorSpectrogram(ops.matmul(frames, cos_basis), ops.matmul(frames, sin_basis))


def magnitude_tensor(spec: TensorSpectrogram, eps: float = MAGNITUDE_EPS) -> Tensor:
    return ops.sqrt(ops.add(ops.add(ops.square(spec.real), ops.square(spec.imag)), eps))


def phase_tensor(spec: TensorSpectrogram) -> Tensor:
    return ops.atan2(spec.imag, spec.real)


def compressed_polar(spec: TensorSpectrogram, c: float, eps: float = MAGNITUDE_EPS):
    """(|X|^c, angle(X)) of a tensor spectrogram."""
    return ops.power(magnitude_tensor(spec, eps), c), phase_tensor(spec)


def from_compressed_polar(compressed_mag, phase, c: float) -> TensorSpectrogram:
    """Undoes the power-law compression and rebuilds real/imag parts."""
    compressed_mag, phase = as_tensor(compressed_mag), as_tensor(phase)
    magnitude = ops.power(compressed_mag, 1.0 / c)
    return TensorSpectrogram(
        ops.mul(magnitude, ops.cos(phase)),
        ops.mul(magnitude, ops.sin(phase)),
        compressed_mag=compressed_mag,
        phase=phase,
    )


def compressed_cartesian(spec: TensorSpectrogram, c: float, eps: float = MAGNITUDE_EPS) -> TensorSpectrogram:
    """|X|^c * exp(j angle(X)) as real/imag parts; the domain of the complex and consistency losses."""
    magnitude = magnitude_tensor(spec, eps)
    scale = ops.power(magnitude, c - 1.0)
    return TensorSpectrogram(ops.mul(spec.real, scale), ops.mul(spec.imag, scale))
