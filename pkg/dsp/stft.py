from functools import lru_cache

import numpy as np
from scipy.signal import get_window

from utils.exceptions import ConfigError, DomainError, EmptyInput
from .types import AudioBuffer, Spectrogram, StftConfig

# overlap-add envelope values below this are treated as "not covered by any frame"
ENVELOPE_FLOOR = 1e-10


@lru_cache(maxsize=32)
def _windows(win_len: int, window: str):
    if window == "rect":
        base = np.ones(win_len)
    else:
        base = get_window("hann", win_len, fftbins=True)
    if window == "hann_sqrt":
        analysis = np.sqrt(base)
        synthesis = analysis
    else:
        analysis = base
        synthesis = base
    analysis.setflags(write=False)
    synthesis.setflags(write=False)
    return analysis, synthesis


def analysis_window(cfg: StftConfig) -> np.ndarray:
    return _windows(cfg.win_len, cfg.window)[0]


def synthesis_window(cfg: StftConfig) -> np.ndarray:
    return _windows(cfg.win_len, cfg.window)[1]


def frame_count(n_samples: int, cfg: StftConfig) -> int:
    """T = 1 + floor((len + 2 * pad - win_len) / hop)."""
    padded = n_samples + 2 * cfg.pad
    if padded < cfg.win_len:
        return 0
    return 1 + (padded - cfg.win_len) // cfg.hop


def padded_length(n_frames: int, cfg: StftConfig) -> int:
    return (n_frames - 1) * cfg.hop + cfg.win_len


def reflect_index(index: np.ndarray, n_samples: int) -> np.ndarray:
    """Maps (possibly out-of-range) sample indices onto [0, n) by mirror reflection without edge repeat."""
    if n_samples == 1:
        return np.zeros_like(index)
    period = 2 * (n_samples - 1)
    folded = np.mod(index, period)
    return np.where(folded >= n_samples, period - folded, folded)


def frame_indices(n_samples: int, cfg: StftConfig) -> np.ndarray:
    """
    T x win_len matrix of indices into the *unpadded* signal.

    Reflect padding and framing collapse into one gather, which is also what the
    differentiable front end uses, so both paths frame the signal identically.
    """
    n_frames = frame_count(n_samples, cfg)
    starts = np.arange(n_frames)[:, None] * cfg.hop
    positions = starts + np.arange(cfg.win_len)[None, :] - cfg.pad
    return reflect_index(positions, n_samples)


def ola_envelope(n_frames: int, cfg: StftConfig, length: int) -> np.ndarray:
    """Sum of w_anal * w_synth over all frames, in padded coordinates, for `length` samples."""
    weights = analysis_window(cfg) * synthesis_window(cfg)
    positions = np.arange(n_frames)[:, None] * cfg.hop + np.arange(cfg.win_len)[None, :]
    envelope = np.bincount(positions.ravel(), weights=np.tile(weights, n_frames), minlength=length)
    return envelope[:length]


def _check_audio(audio: AudioBuffer):
    if len(audio) == 0:
        raise EmptyInput("cannot transform an empty audio buffer")


def stft(audio: AudioBuffer, cfg: StftConfig) -> Spectrogram:
    """Centered, windowed short-time Fourier transform keeping the n_fft // 2 + 1 non-negative bins."""
    _check_audio(audio)
    if not isinstance(cfg, StftConfig):
        raise ConfigError("stft needs a StftConfig")
    idx = frame_indices(len(audio), cfg)
    if idx.shape[0] == 0:
        raise EmptyInput(f"{len(audio)} samples are too few for a single {cfg.win_len}-sample frame")
    frames = audio.samples[idx] * analysis_window(cfg)
    spectrum = np.fft.rfft(frames, n=cfg.n_fft, axis=-1)
    return Spectrogram(spectrum.real, spectrum.imag)


def istft(spec: Spectrogram, cfg: StftConfig, out_len: int) -> AudioBuffer:
    """
    Weighted overlap-add synthesis normalized by the window envelope.

    Returns exactly `out_len` samples: the centered padding is removed, anything past
    the last frame is zero-filled.
    """
    if spec.bins != cfg.n_bins:
        raise ConfigError(f"spectrogram has {spec.bins} bins, config expects {cfg.n_bins}")
    if out_len < 0:
        raise ConfigError(f"out_len must be >= 0, got {out_len}")
    n_frames = spec.frames
    frames = np.fft.irfft(spec.real + 1j * spec.imag, n=cfg.n_fft, axis=-1)[:, :cfg.win_len]
    frames = frames * synthesis_window(cfg)

    length = max(padded_length(n_frames, cfg), cfg.pad + out_len)
    positions = np.arange(n_frames)[:, None] * cfg.hop + np.arange(cfg.win_len)[None, :]
    signal = np.bincount(positions.ravel(), weights=frames.ravel(), minlength=length)
    envelope = ola_envelope(n_frames, cfg, length)
    covered = envelope > ENVELOPE_FLOOR
    signal = np.where(covered, signal / np.where(covered, envelope, 1.0), 0.0)
    return AudioBuffer(signal[cfg.pad:cfg.pad + out_len].copy())


def verify_cola(cfg: StftConfig) -> bool:
    """
    True iff sum_m w_synth(n - m*hop) * w_anal(n - m*hop) is constant over interior n.

    The steady-state overlap sum only depends on n mod hop, so folding the window
    product onto one hop period gives every value the interior can take.
    """
    product = analysis_window(cfg) * synthesis_window(cfg)
    padded = np.zeros(-(-cfg.win_len // cfg.hop) * cfg.hop)
    padded[:cfg.win_len] = product
    folded = padded.reshape(-1, cfg.hop).sum(axis=0)
    peak = folded.max()
    if peak <= 0.0:
        return False
    return bool((peak - folded.min()) <= 1e-8 * peak)


def compress_magnitude(mag, c: float) -> np.ndarray:
    mag = np.asarray(mag, dtype=np.float64)
    _check_exponent(c)
    if np.any(mag < 0):
        raise DomainError("magnitude must be non-negative")
    return np.power(mag, c)


def decompress_magnitude(mag, c: float) -> np.ndarray:
    mag = np.asarray(mag, dtype=np.float64)
    _check_exponent(c)
    if np.any(mag < 0):
        raise DomainError("compressed magnitude must be non-negative")
    return np.power(mag, 1.0 / c)


def _check_exponent(c: float):
    if not (0.0 < c <= 1.0):
        raise DomainError(f"compression exponent must lie in (0, 1], got {c}")
