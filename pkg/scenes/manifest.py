import json
import logging
from pathlib import Path

from rest_framework import serializers

from utils.canonical_json import read_json, write_json
from utils.exceptions import FileError
from .serializers import SceneManifestSerializer
from .types import SceneManifest

logger = logging.getLogger("avsem")


def validate_manifest(payload: dict, root=None) -> SceneManifest:
    """
    Validates a manifest document and builds the SceneManifest.

    Args:
        payload (dict): the parsed JSON document.
        root: directory the scene paths are relative to; when given, every referenced
            file is checked as well.

    Raises:
        rest_framework.serializers.ValidationError: detail names the offending field or path.
    """
    serializer = SceneManifestSerializer(data=payload, context={"root": root})
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def load_manifest(path, check_files: bool = True) -> SceneManifest:
    """Reads and validates `path`; scene paths resolve against the manifest's directory."""
    path = Path(path)
    try:
        payload = read_json(path)
    except FileNotFoundError as exc:
        raise FileError(f"manifest {path} does not exist") from exc
    except json.JSONDecodeError as exc:
        raise serializers.ValidationError({"manifest": f"{path} is not valid JSON: {exc}"}) from exc
    except OSError as exc:
        raise FileError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise serializers.ValidationError({"manifest": f"{path} must hold a JSON object"})
    manifest = validate_manifest(payload, root=path.parent if check_files else None)
    logger.debug(f"loaded manifest {path} with {len(manifest)} scenes")
    return manifest


def write_manifest(manifest: SceneManifest, path) -> Path:
    """Sorted-key JSON with a trailing newline; equal manifests give equal bytes."""
    path = Path(path)
    try:
        write_json(path, manifest.to_dict())
    except OSError as exc:
        raise FileError(f"cannot write manifest {path}: {exc}") from exc
    return path
