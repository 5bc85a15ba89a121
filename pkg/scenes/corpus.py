import logging
from pathlib import Path

from utils.exceptions import ConfigError, FileError
from .manifest import write_manifest
from .tasks import synthesize_scene
from .types import SceneManifest, SceneSpec

logger = logging.getLogger("avsem")

MANIFEST_NAME = "manifest.json"


def generate_toy_corpus(n_scenes: int, seed: int, out_dir, visual_dim: int = 64, encoder_seed: int = 0,
                        duration: float = 1.0) -> SceneManifest:
    """
    Synthesizes `n_scenes` toy scenes into `out_dir` and writes `out_dir/manifest.json`.

    Scenes are dispatched as Celery tasks: in-process when CELERY_TASK_ALWAYS_EAGER is on,
    to workers otherwise. Each task writes only its own scene; the manifest is written
    here, once, after every task has returned.

    Raises:
        ConfigError: negative scene count or non-positive duration.
        FileError: `out_dir` cannot be created or written.
    """
    if n_scenes < 0:
        raise ConfigError(f"n_scenes must be >= 0, got {n_scenes}")
    if duration <= 0:
        raise ConfigError(f"duration must be positive, got {duration}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FileError(f"cannot create corpus directory {out_dir}: {exc}") from exc

    pending = [
        synthesize_scene.apply_async(args=[str(out_dir), index, seed, visual_dim, encoder_seed, duration])
        for index in range(n_scenes)
    ]
    scenes = [SceneSpec.from_dict(result.get()) for result in pending]

    manifest = SceneManifest(scenes=scenes)
    write_manifest(manifest, out_dir / MANIFEST_NAME)
    logger.info(f"toy corpus: {n_scenes} scenes (seed {seed}) in {out_dir}")
    return manifest
