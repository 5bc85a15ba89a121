import logging
from pathlib import Path
from typing import Optional

from enhancer.checkpoint import Checkpoint
from enhancer.network import forward
from enhancer.visual import read_vemb
from scenes.mixer import mix_scene
from scenes.types import SceneManifest, SceneSpec
from .report import MetricsReport, SceneMetrics, write_report
from .si_sdr import SI_SDR_CAP_DB, si_sdr
from .stoi import STOI_PARAMETERS, stoi

logger = logging.getLogger("avsem")

PASSTHROUGH_METHOD = "Passthrough"
MODEL_METHOD = "TF-Mamba AV (toy)"


def enhance_scene(spec: SceneSpec, root, checkpoint: Optional[Checkpoint]):
    """(noisy, clean, enhanced) for one scene; enhanced is the noisy input itself in passthrough mode."""
    noisy, clean = mix_scene(spec, root)
    if checkpoint is None:
        return noisy, clean, noisy
    cfg = checkpoint.config
    visual = None
    if cfg.use_visual and spec.visual_path is not None:
        visual = read_vemb(Path(root) / spec.visual_path)
    enhanced, _ = forward(noisy, visual, cfg, checkpoint.params)
    return noisy, clean, enhanced


def score_scene(spec: SceneSpec, root, checkpoint: Optional[Checkpoint]) -> SceneMetrics:
    noisy, clean, enhanced = enhance_scene(spec, root, checkpoint)
    noisy_si_sdr = si_sdr(clean, noisy)
    method_si_sdr = si_sdr(clean, enhanced)
    noisy_stoi = stoi(clean, noisy)
    method_stoi = noisy_stoi if enhanced is noisy else stoi(clean, enhanced)
    return SceneMetrics(
        scene_id=spec.scene_id,
        stoi=method_stoi,
        si_sdr_db=method_si_sdr,
        si_sdr_improvement_db=method_si_sdr - noisy_si_sdr,
        noisy_stoi=noisy_stoi,
        noisy_si_sdr_db=noisy_si_sdr,
    )


def report_config(manifest: SceneManifest, checkpoint: Optional[Checkpoint]) -> dict:
    config = {
        "mode": "passthrough" if checkpoint is None else "checkpoint",
        "scene_count": len(manifest),
        "sample_rate": manifest.sample_rate,
        "si_sdr_cap_db": SI_SDR_CAP_DB,
        "stoi": dict(STOI_PARAMETERS),
    }
    if checkpoint is not None:
        config["checkpoint_step"] = checkpoint.step
        config["model"] = checkpoint.config.to_dict()
        config["scan_chunk"] = checkpoint.config.scan_chunk
    return config


def evaluate_manifest(manifest: SceneManifest, root, checkpoint: Optional[Checkpoint] = None,
                      out_path=None) -> MetricsReport:
    """
    Scores every scene of `manifest` (paths relative to `root`) with the checkpoint's model,
    or with the noisy input itself when `checkpoint` is None, and optionally writes the
    report. Any scene error aborts the whole evaluation.
    """
    rows = []
    for spec in manifest.scenes:
        row = score_scene(spec, root, checkpoint)
        logger.info(
            f"{spec.scene_id}: stoi {row.stoi:.4f}, si-sdr {row.si_sdr_db:.2f} dB "
            f"({row.si_sdr_improvement_db:+.2f} dB)"
        )
        rows.append(row)

    method = PASSTHROUGH_METHOD if checkpoint is None else MODEL_METHOD
    report = MetricsReport(method=method, rows=rows, config=report_config(manifest, checkpoint))
    if out_path is not None:
        write_report(report, out_path)
    return report
