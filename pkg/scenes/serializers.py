import math
from pathlib import Path, PurePosixPath

from rest_framework import serializers

from dsp.wav_io import read_wav
from utils.exceptions import FileError, ResampleRequired
from .types import FIT_CHOICES, MANIFEST_SAMPLE_RATE, MANIFEST_VERSION, MAX_SEED, SceneManifest, SceneSpec

AUDIO_FIELDS = ("target_path", "interferer_path", "noise_path")


class SourcePlacementSerializer(serializers.Serializer):
    offset = serializers.IntegerField(min_value=0, allow_null=True, default=None)
    fit = serializers.ChoiceField(choices=FIT_CHOICES, default="loop")


class SceneSpecSerializer(serializers.Serializer):
    # scene ids become directory names
    scene_id = serializers.RegexField(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$", max_length=128)
    target_path = serializers.CharField()
    interferer_path = serializers.CharField(allow_null=True, required=False, default=None)
    noise_path = serializers.CharField(allow_null=True, required=False, default=None)
    snr_interferer_db = serializers.FloatField(default=0.0)
    snr_noise_db = serializers.FloatField(default=0.0)
    seed = serializers.IntegerField(min_value=0, max_value=MAX_SEED, default=0)
    interferer_placement = SourcePlacementSerializer(required=False)
    noise_placement = SourcePlacementSerializer(required=False)
    visual_path = serializers.CharField(allow_null=True, required=False, default=None)

    def _relative(self, value):
        if value is not None and PurePosixPath(value).is_absolute():
            raise serializers.ValidationError(f"{value}: paths must be relative to the manifest directory.")
        return value

    def validate_target_path(self, value):
        return self._relative(value)

    def validate_interferer_path(self, value):
        return self._relative(value)

    def validate_noise_path(self, value):
        return self._relative(value)

    def validate_visual_path(self, value):
        return self._relative(value)

    def validate_snr_interferer_db(self, value):
        if not math.isfinite(value):
            raise serializers.ValidationError("SNR must be finite.")
        return value

    def validate_snr_noise_db(self, value):
        if not math.isfinite(value):
            raise serializers.ValidationError("SNR must be finite.")
        return value

    def validate(self, attrs):
        if attrs.get("interferer_path") is None and attrs.get("noise_path") is None:
            raise serializers.ValidationError("A scene needs an interferer_path, a noise_path or both.")
        return attrs


class SceneManifestSerializer(serializers.Serializer):
    """
    Validates a manifest document. With a `root` in the context every referenced file is
    also checked: audio must exist and be 16 kHz mono PCM16, embeddings must exist.
    """
    version = serializers.IntegerField()
    sample_rate = serializers.IntegerField(default=MANIFEST_SAMPLE_RATE)
    scenes = SceneSpecSerializer(many=True)

    def validate_version(self, value):
        if value != MANIFEST_VERSION:
            raise serializers.ValidationError(f"Unsupported manifest version {value}, expected {MANIFEST_VERSION}.")
        return value

    def validate_sample_rate(self, value):
        if value != MANIFEST_SAMPLE_RATE:
            raise serializers.ValidationError(f"Sample rate must be {MANIFEST_SAMPLE_RATE}.")
        return value

    def validate_scenes(self, scenes):
        seen = set()
        for scene in scenes:
            if scene["scene_id"] in seen:
                raise serializers.ValidationError(f"Duplicate scene_id {scene['scene_id']!r}.")
            seen.add(scene["scene_id"])
        return scenes

    def validate(self, attrs):
        root = self.context.get("root")
        if root is None:
            return attrs
        root = Path(root)
        problems = []
        for scene in attrs["scenes"]:
            for field in AUDIO_FIELDS:
                rel = scene.get(field)
                if rel is None:
                    continue
                path = root / rel
                if not path.is_file():
                    problems.append(f"{scene['scene_id']}: {field} {rel} does not exist.")
                    continue
                try:
                    read_wav(path)
                except (FileError, ResampleRequired) as exc:
                    problems.append(f"{scene['scene_id']}: {field} {rel} is not 16 kHz mono PCM16 ({exc}).")
            visual = scene.get("visual_path")
            if visual is not None and not (root / visual).is_file():
                problems.append(f"{scene['scene_id']}: visual_path {visual} does not exist.")
        if problems:
            raise serializers.ValidationError({"scenes": problems})
        return attrs

    def create(self, validated_data):
        scenes = [SceneSpec.from_dict(scene) for scene in validated_data["scenes"]]
        return SceneManifest(
            scenes=scenes,
            version=validated_data["version"],
            sample_rate=validated_data["sample_rate"],
        )
