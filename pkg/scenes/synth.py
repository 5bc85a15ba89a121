"""
Deterministic toy source material: speech-like targets, tonal interferers, coloured
noise and a mouth-opening video that follows the target envelope.
"""
from pathlib import Path
from typing import Tuple

import numpy as np
from PIL import Image
from scipy import signal

from utils.exceptions import DomainError, FileError

SAMPLE_RATE = 16000
VIDEO_FPS = 25
PEAK = 0.5
MOUTH_SIZE = 16
NOISE_KINDS = ("pink", "brown", "white")

# first three formants of a neutral vowel, centre (Hz) and bandwidth (Hz)
FORMANTS = ((600.0, 120.0), (1200.0, 160.0), (2500.0, 250.0))
FORMANT_GAINS = (1.0, 0.6, 0.3)


def _peak_normalize(x: np.ndarray, peak: float = PEAK) -> np.ndarray:
    top = np.abs(x).max()
    if top == 0.0:
        raise DomainError("synthesized signal is silent")
    return x * (peak / top)


def _syllabic_envelope(rng: np.random.Generator, n: int, sr: int, floor: float = 0.0) -> np.ndarray:
    rate = rng.uniform(3.5, 5.5)
    phase = rng.uniform(0.0, np.pi)
    t = np.arange(n) / sr
    return floor + (1.0 - floor) * np.sin(np.pi * rate * t + phase) ** 2


def _pause_gate(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    """1 where the talker speaks, 0 inside one or two pauses, with 10 ms raised-cosine edges."""
    gate = np.ones(n)
    for _ in range(int(rng.integers(1, 3))):
        length = int(rng.uniform(0.12, 0.25) * sr)
        if length >= n // 2:
            continue
        start = int(rng.integers(n // 8, n - length))
        gate[start:start + length] = 0.0
    ramp = np.hanning(int(0.01 * sr) + 2)[1:-1]
    smoothed = np.convolve(gate, ramp / ramp.sum(), mode="same")
    # pause interiors stay exactly zero
    return smoothed * gate


def speech_like(rng: np.random.Generator, n: int, sr: int = SAMPLE_RATE) -> Tuple[np.ndarray, np.ndarray]:
    """
    Formant-filtered white noise under a syllabic amplitude modulation with pauses.

    Returns:
        (samples, envelope): the waveform (peak 0.5) and the modulation that drives it.
    """
    if n < 1:
        raise DomainError("need at least one sample")
    excitation = rng.standard_normal(n)
    jitter = rng.uniform(0.85, 1.15, size=len(FORMANTS))
    voiced = np.zeros(n)
    for (centre, width), gain, j in zip(FORMANTS, FORMANT_GAINS, jitter):
        low, high = centre * j - width / 2, centre * j + width / 2
        b, a = signal.butter(2, [low, high], btype="bandpass", fs=sr)
        voiced += gain * signal.lfilter(b, a, excitation)
    envelope = _syllabic_envelope(rng, n, sr) * _pause_gate(rng, n, sr)
    return _peak_normalize(voiced * envelope), envelope


def harmonic_interferer(rng: np.random.Generator, n: int, sr: int = SAMPLE_RATE, n_harmonics: int = 8) -> np.ndarray:
    """Harmonic complex (1/k amplitudes) with 5-6 Hz vibrato and a slow syllabic swell."""
    f0 = rng.uniform(140.0, 280.0)
    vibrato_rate = rng.uniform(5.0, 6.0)
    depth = rng.uniform(0.02, 0.04)
    t = np.arange(n) / sr
    inst_freq = f0 * (1.0 + depth * np.sin(2 * np.pi * vibrato_rate * t))
    phase = 2 * np.pi * np.cumsum(inst_freq) / sr
    tone = np.zeros(n)
    for k in range(1, n_harmonics + 1):
        if k * f0 * (1.0 + depth) >= 0.45 * sr:
            break
        tone += np.sin(k * phase + rng.uniform(0.0, 2 * np.pi)) / k
    return _peak_normalize(tone * _syllabic_envelope(rng, n, sr, floor=0.2))


def colored_noise(rng: np.random.Generator, n: int, kind: str = "pink", sr: int = SAMPLE_RATE) -> np.ndarray:
    """White noise shaped in the rfft domain: 1/sqrt(f) for pink, 1/f for brown."""
    if kind not in NOISE_KINDS:
        raise DomainError(f"noise kind must be one of {NOISE_KINDS}, got {kind!r}")
    white = rng.standard_normal(n)
    if kind == "white":
        return _peak_normalize(white)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, 1.0 / sr)
    freqs[0] = freqs[1] if n > 1 else 1.0
    exponent = 0.5 if kind == "pink" else 1.0
    shaped = spectrum / freqs ** exponent
    shaped[0] = 0.0
    return _peak_normalize(np.fft.irfft(shaped, n=n))


def mouth_video(envelope, sr: int = SAMPLE_RATE, fps: int = VIDEO_FPS, size: int = MOUTH_SIZE) -> np.ndarray:
    """
    One frame per 1/fps seconds of `envelope`: a filled ellipse whose height follows the
    frame's mean envelope (closed mouth = thin slit).

    Returns:
        V x size x size uint8 frames, V = ceil(len(envelope) * fps / sr).
    """
    envelope = np.asarray(envelope, dtype=np.float64)
    n = envelope.shape[0]
    n_frames = max(1, -(-n * fps // sr))
    edges = (np.arange(n_frames + 1) * sr) // fps
    openings = np.array([envelope[a:min(b, n)].mean() if a < n else 0.0 for a, b in zip(edges[:-1], edges[1:])])
    top = openings.max()
    if top > 0.0:
        openings = openings / top

    centre = (size - 1) / 2.0
    y, x = np.mgrid[0:size, 0:size]
    half_width = 0.35 * size
    frames = np.zeros((n_frames, size, size), dtype=np.uint8)
    for i, opening in enumerate(openings):
        half_height = 0.5 + opening * 0.3 * size
        inside = ((x - centre) / half_width) ** 2 + ((y - centre) / half_height) ** 2 <= 1.0
        frames[i][inside] = 255
    return frames


def write_video(path, frames) -> Path:
    """Multi-page uncompressed TIFF: lossless and one page per frame, duplicates included."""
    path = Path(path)
    pages = [Image.fromarray(np.asarray(frame, dtype=np.uint8)) for frame in frames]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        pages[0].save(path, format="TIFF", save_all=True, append_images=pages[1:])
    except OSError as exc:
        raise FileError(f"cannot write video frames to {path}: {exc}") from exc
    return path
