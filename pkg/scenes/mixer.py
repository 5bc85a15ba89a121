"""
Scene composition: target + interferer and/or noise at requested SNRs.

Powers are measured on active samples only: the signal is cut into non-overlapping
256-sample frames (last partial frame included) and a frame is active when its energy
lies within 40 dB of the loudest frame. The same rule applies to the target and to
every fitted source, and the audit recomputes it on the emitted stems.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from dsp.types import AudioBuffer
from dsp.wav_io import read_wav, write_wav
from utils.exceptions import DomainError, EmptyInput, ZeroPowerSource
from .types import SceneSpec, SourcePlacement

logger = logging.getLogger("avsem")

ACTIVITY_FRAME = 256
ACTIVITY_RANGE_DB = 40.0
PEAK_LIMIT = 0.99

# rng stream per stem kind, so a noise offset does not depend on whether an interferer exists
SOURCE_STREAMS = {"interferer": 1, "noise": 2}


def active_mask(samples, frame: int = ACTIVITY_FRAME, range_db: float = ACTIVITY_RANGE_DB) -> np.ndarray:
    """Per-sample boolean mask of the frames whose energy is within `range_db` of the maximum."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    n_frames = -(-n // frame)
    padded = np.zeros(n_frames * frame)
    padded[:n] = samples
    energy = np.sum(padded.reshape(n_frames, frame) ** 2, axis=1)
    peak = energy.max()
    if peak == 0.0:
        return np.zeros(n, dtype=bool)
    active = energy > peak * 10.0 ** (-range_db / 10.0)
    return np.repeat(active, frame)[:n]


def active_power(samples) -> float:
    """Mean square over active samples; 0.0 for an all-zero signal."""
    samples = np.asarray(samples, dtype=np.float64)
    mask = active_mask(samples)
    if not mask.any():
        return 0.0
    return float(np.mean(samples[mask] ** 2))


def snr_scale(target_power: float, source_power: float, snr_db: float) -> float:
    """Gain that puts a source of `source_power` at `snr_db` below `target_power`."""
    if source_power <= 0.0:
        raise ZeroPowerSource("a source with zero energy cannot reach a finite SNR")
    return float(np.sqrt(target_power / (source_power * 10.0 ** (snr_db / 10.0))))


def resolve_offset(placement: SourcePlacement, source_len: int, seed: int, stream: int) -> int:
    if placement.offset is not None:
        return placement.offset
    return int(np.random.default_rng([seed, stream]).integers(source_len))


def fit_source(samples, n: int, placement: SourcePlacement, seed: int = 0, stream: int = 0) -> np.ndarray:
    """
    Cuts a source clip to the target length `n` starting at the placement offset.

    `loop` wraps around the clip as often as needed; `truncate` plays it once and pads
    with silence.
    """
    samples = np.asarray(samples, dtype=np.float64)
    source_len = samples.shape[0]
    if source_len == 0:
        raise EmptyInput("source clip is empty")
    offset = resolve_offset(placement, source_len, seed, stream)

    if placement.fit == "loop":
        return samples[(offset + np.arange(n)) % source_len]

    if offset >= source_len:
        raise DomainError(f"offset {offset} lies beyond the {source_len}-sample source (truncate)")
    segment = samples[offset:offset + n]
    return np.pad(segment, (0, n - segment.shape[0]))


@dataclass(frozen=True, eq=False)
class SceneStems:
    """Every emitted component of one mixed scene, after the joint peak rescale."""
    scene_id: str
    noisy: np.ndarray
    target: np.ndarray
    sources: Dict[str, np.ndarray]
    scales: Dict[str, float]
    peak_gain: float
    sample_rate: int = 16000

    def audio(self, name: str) -> AudioBuffer:
        if name == "noisy":
            return AudioBuffer(self.noisy, self.sample_rate)
        if name == "clean":
            return AudioBuffer(self.target, self.sample_rate)
        return AudioBuffer(self.sources[name], self.sample_rate)


def _root(root) -> Path:
    return Path(root) if root is not None else Path(".")


def mix_scene_stems(spec: SceneSpec, root=None) -> SceneStems:
    """
    Reads the scene's clips (paths relative to `root`) and mixes them.

    Raises:
        FileError / ResampleRequired: unreadable or non-16 kHz mono clips.
        DomainError: silent target.
        ZeroPowerSource: a fitted source with no energy.
    """
    root = _root(root)
    target_audio = read_wav(root / spec.target_path)
    target = target_audio.samples
    n = target.shape[0]
    if n == 0:
        raise EmptyInput(f"scene {spec.scene_id!r}: target clip is empty")
    target_power = active_power(target)
    if target_power == 0.0:
        raise DomainError(f"scene {spec.scene_id!r}: target is silent")

    scaled: Dict[str, np.ndarray] = {}
    scales: Dict[str, float] = {}
    for name, path, snr_db, placement in spec.sources():
        raw = read_wav(root / path).samples
        fitted = fit_source(raw, n, placement, spec.seed, SOURCE_STREAMS[name])
        try:
            scale = snr_scale(target_power, active_power(fitted), snr_db)
        except ZeroPowerSource as exc:
            raise ZeroPowerSource(f"scene {spec.scene_id!r}: {name} {path} has zero energy") from exc
        scales[name] = scale
        scaled[name] = scale * fitted

    noisy = target.copy()
    for stem in scaled.values():
        noisy = noisy + stem

    peak = max(np.abs(noisy).max(), np.abs(target).max(), *(np.abs(s).max() for s in scaled.values()))
    gain = 1.0
    if peak > PEAK_LIMIT:
        gain = PEAK_LIMIT / peak
        noisy = noisy * gain
        target = target * gain
        scaled = {name: stem * gain for name, stem in scaled.items()}
        logger.debug(f"scene {spec.scene_id}: peak {peak:.3f}, joint rescale by {gain:.4f}")

    return SceneStems(spec.scene_id, noisy, target, scaled, scales, gain, target_audio.sample_rate)


def mix_scene(spec: SceneSpec, root=None) -> Tuple[AudioBuffer, AudioBuffer]:
    stems = mix_scene_stems(spec, root)
    return stems.audio("noisy"), stems.audio("clean")


def audit_scene_snr(stems: SceneStems) -> Dict[str, float]:
    """Achieved 10*log10(P_target / P_source) per emitted source stem."""
    target_power = active_power(stems.target)
    return {
        name: float(10.0 * np.log10(target_power / active_power(stem)))
        for name, stem in stems.sources.items()
    }


def scene_dir(out_dir, scene_id: str) -> Path:
    return Path(out_dir) / "scenes" / scene_id


def write_scene_stems(stems: SceneStems, out_dir) -> Dict[str, str]:
    """
    Writes `scenes/<id>/{noisy,clean,<source>_scaled}.wav` under `out_dir`.

    Returns:
        Mapping of stem name to its path relative to `out_dir`.
    """
    out_dir = Path(out_dir)
    target_dir = scene_dir(out_dir, stems.scene_id)
    written = {}
    names = ["noisy", "clean"] + list(stems.sources)
    for name in names:
        filename = f"{name}.wav" if name in ("noisy", "clean") else f"{name}_scaled.wav"
        path = target_dir / filename
        write_wav(path, stems.audio(name))
        written[name] = path.relative_to(out_dir).as_posix()
    return written

