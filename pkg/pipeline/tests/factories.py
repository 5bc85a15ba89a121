from pathlib import Path

from autodiff.optim import AdamWConfig
from enhancer.tests.factories import tiny_config
from pipeline.config import OptimizerSettings, PathSettings, RunConfig, TrainingSettings


def tiny_run(root, max_steps=4, eval_every=2, grad_accum=1, lr=5e-3, training_seed=0, **model_overrides) -> RunConfig:
    root = Path(root)
    return RunConfig(
        model=tiny_config(**model_overrides),
        optimizer=OptimizerSettings(AdamWConfig(lr=lr, weight_decay=0.0), grad_accum=grad_accum),
        training=TrainingSettings(max_steps=max_steps, eval_every=eval_every, seed=training_seed),
        paths=PathSettings(
            manifest=str(root / "corpus" / "manifest.json"),
            checkpoint_dir=str(root / "checkpoints"),
            report_dir=str(root / "reports"),
        ),
    )
