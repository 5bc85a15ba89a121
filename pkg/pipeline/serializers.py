import json
from pathlib import Path
from typing import List

from rest_framework import serializers

from autodiff.optim import AdamWConfig
from dsp.types import WINDOW_CHOICES, StftConfig
from enhancer.config import MASK_ACTIVATIONS, ModelConfig
from losses.weights import PHASE_LOSS_VARIANTS, LossWeights
from utils.canonical_json import read_json
from utils.exceptions import ConfigError, FileError
from .config import OptimizerSettings, PathSettings, RunConfig, TrainingSettings


class StrictSerializer(serializers.Serializer):
    """Rejects keys the serializer does not declare instead of dropping them silently."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ["Unknown field."] for key in unknown})
        return super().to_internal_value(data)


class StftSerializer(StrictSerializer):
    n_fft = serializers.IntegerField(min_value=1, required=False)
    hop = serializers.IntegerField(min_value=1, required=False)
    win_len = serializers.IntegerField(min_value=1, required=False)
    window = serializers.ChoiceField(choices=WINDOW_CHOICES, required=False)
    center_pad = serializers.BooleanField(required=False)
    compression_exponent = serializers.FloatField(min_value=0.0, max_value=1.0, required=False)


class ModelSerializer(StrictSerializer):
    stft = StftSerializer(required=False)
    sample_rate = serializers.IntegerField(min_value=1, required=False)
    d_model = serializers.IntegerField(min_value=1, required=False)
    n_tf_blocks = serializers.IntegerField(min_value=1, required=False)
    d_state = serializers.IntegerField(min_value=1, required=False)
    d_conv = serializers.IntegerField(min_value=1, required=False)
    expand = serializers.IntegerField(min_value=1, required=False)
    front_channels = serializers.IntegerField(min_value=1, required=False)
    visual_dim = serializers.IntegerField(min_value=1, required=False)
    visual_proj_dim = serializers.IntegerField(min_value=1, required=False)
    visual_fps = serializers.IntegerField(min_value=1, required=False)
    use_visual = serializers.BooleanField(required=False)
    causal = serializers.BooleanField(required=False)
    mask_activation = serializers.ChoiceField(choices=MASK_ACTIVATIONS, required=False)
    scan_chunk = serializers.IntegerField(min_value=1, required=False)
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1, required=False)


class LossSerializer(StrictSerializer):
    w_time = serializers.FloatField(min_value=0.0, required=False)
    w_mag = serializers.FloatField(min_value=0.0, required=False)
    w_complex = serializers.FloatField(min_value=0.0, required=False)
    w_phase = serializers.FloatField(min_value=0.0, required=False)
    w_consistency = serializers.FloatField(min_value=0.0, required=False)
    phase_loss = serializers.ChoiceField(choices=PHASE_LOSS_VARIANTS, required=False)


class OptimizerSerializer(StrictSerializer):
    lr = serializers.FloatField(required=False)
    betas = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2, required=False)
    eps = serializers.FloatField(required=False)
    weight_decay = serializers.FloatField(min_value=0.0, required=False)
    grad_accum = serializers.IntegerField(min_value=1, required=False)

    def validate_lr(self, value):
        if value <= 0:
            raise serializers.ValidationError("Learning rate must be positive.")
        return value

    def validate_betas(self, value):
        if not all(0.0 <= beta < 1.0 for beta in value):
            raise serializers.ValidationError("Both betas must lie in [0, 1).")
        return value


class TrainingSerializer(StrictSerializer):
    max_steps = serializers.IntegerField(min_value=1, required=False)
    eval_every = serializers.IntegerField(min_value=1, required=False)
    seed = serializers.IntegerField(min_value=0, required=False)
    held_scene = serializers.CharField(allow_null=True, required=False)


class PathsSerializer(StrictSerializer):
    manifest = serializers.CharField(required=False)
    checkpoint_dir = serializers.CharField(required=False)
    report_dir = serializers.CharField(required=False)


class RunConfigSerializer(StrictSerializer):
    """
    One run configuration document. Missing sections and keys take the dataclass defaults;
    unknown keys are errors, reported under their section.
    """
    model = ModelSerializer(required=False)
    loss = LossSerializer(required=False)
    optimizer = OptimizerSerializer(required=False)
    training = TrainingSerializer(required=False)
    paths = PathsSerializer(required=False)

    def create(self, validated_data):
        model = dict(validated_data.get("model", {}))
        optimizer = dict(validated_data.get("optimizer", {}))
        grad_accum = optimizer.pop("grad_accum", OptimizerSettings.grad_accum)
        if "betas" in optimizer:
            optimizer["betas"] = tuple(optimizer["betas"])
        builders = {
            "model": lambda: ModelConfig(stft=StftConfig(**model.pop("stft", {})), **model),
            "loss": lambda: LossWeights(**validated_data.get("loss", {})),
            "optimizer": lambda: OptimizerSettings(AdamWConfig(**optimizer), grad_accum),
            "training": lambda: TrainingSettings(**validated_data.get("training", {})),
            "paths": lambda: PathSettings(**validated_data.get("paths", {})),
        }
        sections = {}
        for name, build in builders.items():
            try:
                sections[name] = build()
            except ConfigError as exc:
                raise serializers.ValidationError({name: [str(exc)]}) from exc
        return RunConfig(**sections)


def run_config_from_dict(payload) -> RunConfig:
    if not isinstance(payload, dict):
        raise serializers.ValidationError({"config": ["Expected a JSON object."]})
    serializer = RunConfigSerializer(data=payload)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        payload = read_json(path)
    except FileNotFoundError as exc:
        raise FileError(f"config file {path} does not exist") from exc
    except json.JSONDecodeError as exc:
        raise serializers.ValidationError({"config": [f"{path} is not valid JSON: {exc}"]}) from exc
    return run_config_from_dict(payload)


def flatten_errors(detail, prefix: str = "") -> List[str]:
    """Turns nested serializer errors into 'section.field: message' lines."""
    if isinstance(detail, dict):
        lines = []
        for key, value in detail.items():
            name = key if key != "non_field_errors" else ""
            lines.extend(flatten_errors(value, f"{prefix}.{name}".strip(".") if name else prefix))
        return lines
    if isinstance(detail, list):
        lines = []
        for index, item in enumerate(detail):
            if isinstance(item, (dict, list)):
                lines.extend(flatten_errors(item, f"{prefix}[{index}]"))
            else:
                lines.append(f"{prefix}: {item}" if prefix else str(item))
        return lines
    return [f"{prefix}: {detail}" if prefix else str(detail)]
