import logging
from pathlib import Path

import numpy as np
import soundfile as sf

from utils.exceptions import FileError, ResampleRequired
from .types import AudioBuffer

logger = logging.getLogger("avsem")

REQUIRED_SAMPLE_RATE = 16000
PCM16_SCALE = 32768.0
PCM16_LIMIT = 32767


def to_pcm16(samples) -> np.ndarray:
    """Float samples -> int16: scale by 32768, round, clip symmetrically at +/-32767."""
    scaled = np.rint(np.asarray(samples, dtype=np.float64) * PCM16_SCALE)
    return np.clip(scaled, -PCM16_LIMIT, PCM16_LIMIT).astype("<i2")


def from_pcm16(pcm) -> np.ndarray:
    return np.asarray(pcm, dtype=np.float64) / PCM16_SCALE


def read_wav(path, required_rate: int = REQUIRED_SAMPLE_RATE) -> AudioBuffer:
    """
    Reads a RIFF/WAVE PCM 16-bit mono file.

    Raises:
        FileError: missing/unreadable file, wrong sample format or more than one channel.
        ResampleRequired: the file is not at `required_rate`; nothing is resampled implicitly.
    """
    path = Path(path)
    try:
        info = sf.info(str(path))
    except (RuntimeError, OSError) as exc:
        raise FileError(f"cannot open WAV file {path}: {exc}") from exc

    if info.format != "WAV" or info.subtype != "PCM_16":
        raise FileError(f"{path}: expected WAV/PCM_16, got {info.format}/{info.subtype}")
    if info.channels != 1:
        raise FileError(f"{path}: expected mono, got {info.channels} channels")
    if info.samplerate != required_rate:
        raise ResampleRequired(f"{path}: sample rate {info.samplerate} Hz, {required_rate} Hz required")

    pcm, _ = sf.read(str(path), dtype="int16", always_2d=False)
    return AudioBuffer(from_pcm16(pcm), info.samplerate)


def write_wav(path, audio: AudioBuffer):
    """Writes `audio` as 16-bit PCM mono; parent directories are created."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        sf.write(str(path), to_pcm16(audio.samples), audio.sample_rate, subtype="PCM_16", format="WAV")
    except (RuntimeError, OSError) as exc:
        raise FileError(f"cannot write WAV file {path}: {exc}") from exc
    logger.debug(f"wrote {len(audio)} samples to {path}")
