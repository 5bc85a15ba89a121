"""
Toy training and single-file enhancement.

One optimizer step averages the gradients of `grad_accum` scene passes. Scene order is a
pure function of the training seed and the micro-step index, so a run resumed from a
checkpoint replays exactly the updates the uninterrupted run would have made.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import jsonschema
import numpy as np
from django.conf import settings

from autodiff.optim import AdamWState, adamw_step
from autodiff.tensor import Tape
from dsp.stft import stft
from dsp.types import AudioBuffer, Spectrogram
from dsp.wav_io import read_wav, write_wav
from enhancer.checkpoint import Checkpoint, save_checkpoint
from enhancer.config import ModelConfig
from enhancer.network import check_params, forward, forward_tensors, init_params, parameter_count
from enhancer.visual import (
    VisualEmbeddingSequence, load_video_frames, read_vemb, stub_visual_encoder,
)
from losses.terms import total_loss
from metrics.si_sdr import si_sdr
from scenes.mixer import mix_scene
from scenes.types import SceneManifest
from utils.canonical_json import dumps_canonical, read_json
from utils.exceptions import ConfigError, EmptyInput, FileError
from .config import RunConfig

logger = logging.getLogger("avsem")

LOG_NAME = "train_log.jsonl"
LATEST_NAME = "latest.avsm"


@dataclass(frozen=True, eq=False)
class TrainingExample:
    scene_id: str
    noisy: AudioBuffer
    clean: AudioBuffer
    target: Spectrogram
    visual: Optional[VisualEmbeddingSequence]


@dataclass(frozen=True)
class TrainingSummary:
    step: int
    first_loss: Optional[float]
    last_loss: Optional[float]
    held_scene: str
    held_si_sdr_db: float
    held_si_sdr_improvement_db: float
    checkpoint: Optional[Path]


def checkpoint_name(step: int) -> str:
    return f"step_{step:06d}.avsm"


def load_examples(manifest: SceneManifest, root, cfg: ModelConfig) -> List[TrainingExample]:
    """Mixes every scene once and keeps the noisy/clean pair, the clean STFT and the embeddings."""
    examples = []
    for spec in manifest.scenes:
        noisy, clean = mix_scene(spec, root)
        visual = None
        if cfg.use_visual and spec.visual_path is not None:
            visual = read_vemb(Path(root) / spec.visual_path)
        examples.append(TrainingExample(spec.scene_id, noisy, clean, stft(clean, cfg.stft), visual))
    return examples


class ToyTrainer:
    """
    Overfits the model on the scenes of a (small) manifest.

    Args:
        run (RunConfig): model, loss, optimizer, schedule and output locations.
        manifest (SceneManifest): training scenes; paths relative to `root`.
        root: directory of the manifest.
        resume (Checkpoint, optional): continue from this checkpoint's parameters, AdamW
            moments and step.
    """

    def __init__(self, run: RunConfig, manifest: SceneManifest, root, resume: Optional[Checkpoint] = None):
        if len(manifest) == 0:
            raise EmptyInput("cannot train on an empty manifest")
        self.run = run
        self.cfg = run.model
        self.examples = load_examples(manifest, root, self.cfg)
        held = run.training.held_scene or self.examples[0].scene_id
        matches = [example for example in self.examples if example.scene_id == held]
        if not matches:
            raise ConfigError(f"training.held_scene {held!r} is not in the manifest")
        self.held = matches[0]

        if resume is None:
            self.params = init_params(self.cfg)
            self.state = AdamWState()
        else:
            if resume.config != self.cfg:
                raise ConfigError("checkpoint model config differs from the run's model config")
            if resume.optimizer is None:
                raise ConfigError("checkpoint carries no optimizer state and cannot be resumed")
            check_params(resume.params, self.cfg)
            self.params = resume.params
            self.state = resume.optimizer
        self.step = self.state.step

        self.checkpoint_dir = Path(run.paths.checkpoint_dir)
        self.log_path = self.checkpoint_dir / LOG_NAME
        self.log_schema = read_json(settings.AVSM_TRAINING_LOG_SCHEMA)
        self._ids = {param.node_id: name for name, param in self.params.items()}

    def micro_step(self, example: TrainingExample):
        with Tape() as tape:
            out = forward_tensors(example.noisy, example.visual, self.cfg, self.params)
            loss, terms = total_loss(out.waveform, example.clean, out.spectrogram, example.target,
                                     self.run.loss, self.cfg.stft)
        grads = tape.backward(loss)
        return loss.item(), terms, {self._ids[node_id]: grad.data for node_id, grad in grads.items()}

    def example_at(self, index: int) -> TrainingExample:
        """
        Scene for micro-step `index`: each pass over the manifest is a permutation drawn
        from (training.seed, pass number), so the order is reproducible and resumable.
        """
        n = len(self.examples)
        order = np.random.default_rng([self.run.training.seed, index // n]).permutation(n)
        return self.examples[order[index % n]]

    def train_step(self) -> dict:
        """One optimizer step; returns the log record."""
        accum = self.run.optimizer.grad_accum
        summed: Dict[str, np.ndarray] = {}
        losses, term_sums = [], {}
        for micro in range(accum):
            example = self.example_at(self.step * accum + micro)
            loss, terms, grads = self.micro_step(example)
            losses.append(loss)
            for name, value in terms.items():
                term_sums[name] = term_sums.get(name, 0.0) + value
            for name, grad in grads.items():
                summed[name] = summed[name] + grad if name in summed else grad
        grads = {name: grad / accum for name, grad in summed.items()}
        adamw_step(self.params, grads, self.state, self.run.optimizer.adamw)
        self.step = self.state.step
        return {
            "step": self.step,
            "loss": float(np.mean(losses)),
            "terms": {name: value / accum for name, value in term_sums.items()},
        }

    def held_scores(self):
        enhanced, _ = forward(self.held.noisy, self.held.visual, self.cfg, self.params)
        method = si_sdr(self.held.clean, enhanced)
        return method, method - si_sdr(self.held.clean, self.held.noisy)

    def save(self) -> Path:
        checkpoint = Checkpoint(config=self.cfg, params=self.params, step=self.step, optimizer=self.state)
        path = save_checkpoint(self.checkpoint_dir / checkpoint_name(self.step), checkpoint)
        save_checkpoint(self.checkpoint_dir / LATEST_NAME, checkpoint)
        return path

    def _prepare_log(self):
        """Drops log lines past the resume step so the log reads like an uninterrupted run."""
        self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        if not self.log_path.exists():
            return
        kept = [
            line for line in self.log_path.read_text(encoding="utf-8").splitlines()
            if line.strip() and json.loads(line)["step"] <= self.step
        ]
        self.log_path.write_text("".join(line + "\n" for line in kept), encoding="utf-8")

    def _append_log(self, record: dict):
        jsonschema.validate(instance=record, schema=self.log_schema)
        with open(self.log_path, "a", encoding="utf-8") as f:
            f.write(dumps_canonical(record) + "\n")

    def fit(self, max_steps: Optional[int] = None) -> TrainingSummary:
        max_steps = max_steps or self.run.training.max_steps
        eval_every = self.run.training.eval_every
        try:
            self._prepare_log()
        except OSError as exc:
            raise FileError(f"cannot prepare checkpoint directory {self.checkpoint_dir}: {exc}") from exc
        logger.info(
            f"training {parameter_count(self.params)} parameters on {len(self.examples)} scenes "
            f"from step {self.step} to {max_steps}"
        )

        first_loss = last_loss = None
        checkpoint = None
        held_db, held_gain = self.held_scores()
        while self.step < max_steps:
            record = self.train_step()
            first_loss = record["loss"] if first_loss is None else first_loss
            last_loss = record["loss"]
            if self.step % eval_every == 0 or self.step == max_steps:
                held_db, held_gain = self.held_scores()
                checkpoint = self.save()
                record.update({
                    "held_scene": self.held.scene_id,
                    "held_si_sdr_db": held_db,
                    "held_si_sdr_improvement_db": held_gain,
                    "checkpoint": checkpoint.name,
                })
                logger.info(f"step {self.step}: loss {last_loss:.5f}, held si-sdr {held_db:.2f} dB ({held_gain:+.2f})")
            self._append_log(record)

        return TrainingSummary(self.step, first_loss, last_loss, self.held.scene_id, held_db, held_gain, checkpoint)


def enhance_file(checkpoint: Checkpoint, in_path, out_path, vemb_path=None, video_path=None,
                 encoder_seed: int = 0) -> AudioBuffer:
    """
    Enhances one 16 kHz mono WAV. Visual input comes from a VEMB file or from a multi-frame
    image run through the stub encoder; a model trained with use_visual off ignores both.

    Raises:
        ConfigError: the model expects visual input and neither source was given.
    """
    cfg = checkpoint.config
    if cfg.use_visual and vemb_path is None and video_path is None:
        raise ConfigError("this checkpoint was trained with visual input; pass --vemb or --video")
    noisy = read_wav(in_path)
    visual = None
    if vemb_path is not None:
        visual = read_vemb(vemb_path)
    elif video_path is not None:
        visual = stub_visual_encoder(load_video_frames(video_path), encoder_seed, cfg.visual_dim)
    if not cfg.use_visual:
        visual = None
    enhanced, _ = forward(noisy, visual, cfg, checkpoint.params)
    write_wav(out_path, enhanced)
    logger.info(f"enhanced {in_path} -> {out_path} ({len(noisy)} samples)")
    return enhanced
