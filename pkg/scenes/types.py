import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

from utils.exceptions import ConfigError

FIT_CHOICES = ("loop", "truncate")
MANIFEST_VERSION = 1
MANIFEST_SAMPLE_RATE = 16000
MAX_SEED = 2 ** 64 - 1


@dataclass(frozen=True)
class SourcePlacement:
    """
    Where a source clip starts relative to the target and how it is fitted to the
    target's length. A missing offset is drawn from the scene seed when mixing.
    """
    offset: Optional[int] = None
    fit: str = "loop"

    def __post_init__(self):
        if self.fit not in FIT_CHOICES:
            raise ConfigError(f"fit must be one of {FIT_CHOICES}, got {self.fit!r}")
        if self.offset is not None and self.offset < 0:
            raise ConfigError(f"offset must be >= 0, got {self.offset}")

    def to_dict(self) -> dict:
        return {"offset": self.offset, "fit": self.fit}


@dataclass(frozen=True)
class SceneSpec:
    scene_id: str
    target_path: str
    interferer_path: Optional[str] = None
    noise_path: Optional[str] = None
    snr_interferer_db: float = 0.0
    snr_noise_db: float = 0.0
    seed: int = 0
    interferer_placement: SourcePlacement = field(default_factory=SourcePlacement)
    noise_placement: SourcePlacement = field(default_factory=SourcePlacement)
    visual_path: Optional[str] = None

    def __post_init__(self):
        if not self.scene_id:
            raise ConfigError("scene_id must be a non-empty string")
        if self.interferer_path is None and self.noise_path is None:
            raise ConfigError(f"scene {self.scene_id!r}: at least one of interferer/noise is required")
        for name in ("snr_interferer_db", "snr_noise_db"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"scene {self.scene_id!r}: {name} must be finite")
        if not (0 <= self.seed <= MAX_SEED):
            raise ConfigError(f"scene {self.scene_id!r}: seed must be an unsigned 64-bit integer")

    def sources(self) -> Tuple[Tuple[str, str, float, SourcePlacement], ...]:
        """(stem name, path, requested SNR, placement) for every present source, interferer first."""
        present = []
        if self.interferer_path is not None:
            present.append(("interferer", self.interferer_path, self.snr_interferer_db, self.interferer_placement))
        if self.noise_path is not None:
            present.append(("noise", self.noise_path, self.snr_noise_db, self.noise_placement))
        return tuple(present)

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "target_path": self.target_path,
            "interferer_path": self.interferer_path,
            "noise_path": self.noise_path,
            "snr_interferer_db": self.snr_interferer_db,
            "snr_noise_db": self.snr_noise_db,
            "seed": self.seed,
            "interferer_placement": self.interferer_placement.to_dict(),
            "noise_placement": self.noise_placement.to_dict(),
            "visual_path": self.visual_path,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        data = dict(data)
        for key in ("interferer_placement", "noise_placement"):
            if isinstance(data.get(key), dict):
                data[key] = SourcePlacement(**data[key])
            elif data.get(key) is None:
                data.pop(key, None)
        return cls(**data)


@dataclass(frozen=True)
class SceneManifest:
    scenes: Tuple[SceneSpec, ...] = ()
    version: int = MANIFEST_VERSION
    sample_rate: int = MANIFEST_SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(self.scenes))
        if self.sample_rate != MANIFEST_SAMPLE_RATE:
            raise ConfigError(f"manifest sample_rate must be {MANIFEST_SAMPLE_RATE}, got {self.sample_rate}")
        seen = set()
        for spec in self.scenes:
            if spec.scene_id in seen:
                raise ConfigError(f"duplicate scene_id {spec.scene_id!r}")
            seen.add(spec.scene_id)

    def __len__(self):
        return len(self.scenes)

    def get(self, scene_id: str) -> SceneSpec:
        for spec in self.scenes:
            if spec.scene_id == scene_id:
                return spec
        raise KeyError(scene_id)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "sample_rate": self.sample_rate,
            "scenes": [spec.to_dict() for spec in self.scenes],
        }
