import logging
from pathlib import Path

import numpy as np
from celery import shared_task

from dsp.types import AudioBuffer
from dsp.wav_io import write_wav
from enhancer.visual import load_video_frames, stub_visual_encoder, write_vemb
from .mixer import mix_scene_stems, scene_dir, write_scene_stems
from .synth import NOISE_KINDS, SAMPLE_RATE, colored_noise, harmonic_interferer, mouth_video, speech_like, write_video
from .types import SceneSpec, SourcePlacement

logger = logging.getLogger("avsem")

SNR_RANGE_DB = (-10.0, 10.0)
SOURCE_LENGTH_FACTOR = 1.5
COMPOSITIONS = ("both", "interferer", "noise")


def scene_id_for(index: int) -> str:
    return f"scene_{index:05d}"


@shared_task
def synthesize_scene(out_dir, index, corpus_seed, visual_dim=64, encoder_seed=0, duration=1.0):
    """
    Synthesizes, mixes and writes one toy scene under `out_dir`; returns its manifest entry.

    Every random draw comes from a generator seeded with (corpus_seed, index), so a scene
    never depends on which worker ran it or in which order.
    """
    out_dir = Path(out_dir)
    rng = np.random.default_rng([corpus_seed, index])
    scene_id = scene_id_for(index)
    n = int(round(duration * SAMPLE_RATE))
    n_source = int(round(SOURCE_LENGTH_FACTOR * n))

    target, envelope = speech_like(rng, n)
    interferer = harmonic_interferer(rng, n_source)
    noise_kind = NOISE_KINDS[int(rng.integers(len(NOISE_KINDS)))]
    noise = colored_noise(rng, n_source, noise_kind)
    composition = COMPOSITIONS[int(rng.integers(len(COMPOSITIONS)))]
    snr_interferer = round(float(rng.uniform(*SNR_RANGE_DB)), 2)
    snr_noise = round(float(rng.uniform(*SNR_RANGE_DB)), 2)
    scene_seed = int(rng.integers(2 ** 63))

    source_dir = Path("sources") / scene_id
    write_wav(out_dir / source_dir / "target.wav", AudioBuffer(target, SAMPLE_RATE))
    interferer_path = noise_path = None
    if composition in ("both", "interferer"):
        interferer_path = (source_dir / "interferer.wav").as_posix()
        write_wav(out_dir / interferer_path, AudioBuffer(interferer, SAMPLE_RATE))
    if composition in ("both", "noise"):
        noise_path = (source_dir / f"noise_{noise_kind}.wav").as_posix()
        write_wav(out_dir / noise_path, AudioBuffer(noise, SAMPLE_RATE))

    # the embedding is computed from the decoded file so `enhance --video` reproduces it
    video_path = write_video(out_dir / source_dir / "mouth.tif", mouth_video(envelope))
    embeddings = stub_visual_encoder(load_video_frames(video_path), encoder_seed, visual_dim)
    vemb_path = scene_dir(out_dir, scene_id) / f"{scene_id}.vemb"
    write_vemb(vemb_path, embeddings)

    spec = SceneSpec(
        scene_id=scene_id,
        target_path=(source_dir / "target.wav").as_posix(),
        interferer_path=interferer_path,
        noise_path=noise_path,
        snr_interferer_db=snr_interferer,
        snr_noise_db=snr_noise,
        seed=scene_seed,
        interferer_placement=SourcePlacement(fit="loop"),
        noise_placement=SourcePlacement(fit="loop"),
        visual_path=vemb_path.relative_to(out_dir).as_posix(),
    )
    write_scene_stems(mix_scene_stems(spec, out_dir), out_dir)
    logger.info(f"synthesized {scene_id} ({composition}, noise={noise_kind})")
    return spec.to_dict()
