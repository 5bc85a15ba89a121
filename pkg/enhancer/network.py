"""
The enhancement network.

Every learnable weight lives in one flat ``{name: Tensor}`` mapping so the optimizer,
checkpoints and gradient bookkeeping all address parameters by name. Feature maps are
channels-first (C, T, F) around the convolutions and (T, F, d_model) inside the
time-frequency blocks.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor
from dsp.differentiable import TensorSpectrogram, from_compressed_polar, istft_tensor
from dsp.stft import stft
from dsp.types import AudioBuffer, Spectrogram
from ssm.mamba import TFBlockParams, init_tf_block_params, tf_block_forward
from utils.exceptions import ConfigError, ShapeError
from .config import ModelConfig
from .visual import VisualEmbeddingSequence, align_visual, identity_alignment_kernel

logger = logging.getLogger("avsem")

Params = Dict[str, Tensor]

# keeps the bounded mask strictly inside (0, 2) when the sigmoid saturates
MASK_EPS = 1e-6


@dataclass(frozen=True)
class ForwardHooks:
    """Test switches: a mask fixed at 1 and/or the noisy phase passed through unchanged."""
    identity_mask: bool = False
    passthrough_phase: bool = False


@dataclass(eq=False)
class ForwardOutput:
    waveform: Tensor
    spectrogram: TensorSpectrogram
    mask: Tensor
    noisy: Spectrogram


def _conv_weight(rng, c_out, c_in, k_t, k_f):
    bound = 1.0 / math.sqrt(c_in * k_t * k_f)
    return Tensor(rng.uniform(-bound, bound, size=(c_out, c_in, k_t, k_f)), requires_grad=True)


def _zeros(*shape):
    return Tensor(np.zeros(shape), requires_grad=True)


def init_params(cfg: ModelConfig) -> Params:
    """Fresh parameters drawn from numpy's default generator seeded with cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    d, front, vis, vis_proj = cfg.d_model, cfg.front_channels, cfg.visual_dim, cfg.visual_proj_dim
    params: Params = {
        "front.mag.weight": _conv_weight(rng, front, 1, 1, 1),
        "front.mag.bias": _zeros(front),
        "front.phase.weight": _conv_weight(rng, front, 2, 1, 1),
        "front.phase.bias": _zeros(front),
        "visual.align.weight": Tensor(identity_alignment_kernel(vis), requires_grad=True),
        "visual.align.bias": _zeros(vis),
        "visual.proj.weight": Tensor(rng.uniform(-1, 1, size=(vis, vis_proj)) / math.sqrt(vis), requires_grad=True),
        "visual.proj.bias": _zeros(vis_proj),
        "visual.freq_scale": Tensor(np.ones(cfg.n_bins), requires_grad=True),
        "encoder.conv1.audio.weight": _conv_weight(rng, d, 2 * front, 3, 3),
        "encoder.conv1.visual.weight": _conv_weight(rng, d, vis_proj, 3, 3),
        "encoder.conv1.bias": _zeros(d),
        "encoder.conv2.weight": _conv_weight(rng, d, d, 3, 3),
        "encoder.conv2.bias": _zeros(d),
    }
    for index in range(cfg.n_tf_blocks):
        block = init_tf_block_params(rng, d, d_state=cfg.d_state, d_conv=cfg.d_conv, expand=cfg.expand)
        params.update(block.tensors(f"tf.{index}."))
    params.update({
        "mag_decoder.conv.weight": _conv_weight(rng, d, d, 3, 3),
        "mag_decoder.conv.bias": _zeros(d),
        "mag_decoder.out.weight": _conv_weight(rng, 1, d, 1, 1),
        "mag_decoder.out.bias": _zeros(1),
        "phase_decoder.conv.weight": _conv_weight(rng, d, d, 3, 3),
        "phase_decoder.conv.bias": _zeros(d),
        "phase_decoder.out.weight": _conv_weight(rng, 2, d, 1, 1),
        "phase_decoder.out.bias": _zeros(2),
    })
    logger.debug(f"initialized {parameter_count(params)} parameters with seed {cfg.seed}")
    return params


def parameter_count(params: Params) -> int:
    return int(sum(tensor.size for tensor in params.values()))


def tf_blocks(params: Params, cfg: ModelConfig):
    return [TFBlockParams.from_tensors(params, f"tf.{index}.") for index in range(cfg.n_tf_blocks)]


def check_params(params: Params, cfg: ModelConfig):
    expected = {name: tensor.shape for name, tensor in init_params(cfg).items()}
    missing = sorted(set(expected) - set(params))
    unexpected = sorted(set(params) - set(expected))
    if missing or unexpected:
        raise ConfigError(f"parameter names do not match the config (missing {missing}, unexpected {unexpected})")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ShapeError(f"parameter {name} has shape {params[name].shape}, config implies {shape}")


def _channel_bias(bias: Tensor) -> Tensor:
    return ops.reshape(bias, (bias.shape[0], 1, 1))


def _visual_features(visual: VisualEmbeddingSequence, n_frames: int, cfg: ModelConfig, params: Params) -> Tensor:
    """Aligned, projected and frequency-tiled visual channels: (visual_proj_dim, T, F)."""
    aligned = align_visual(visual, n_frames, cfg, params["visual.align.weight"], params["visual.align.bias"])
    projected = ops.linear(aligned, params["visual.proj.weight"], params["visual.proj.bias"])
    per_frame = ops.reshape(ops.transpose(projected, (1, 0)), (cfg.visual_proj_dim, n_frames, 1))
    scale = ops.reshape(params["visual.freq_scale"], (1, 1, cfg.n_bins))
    return ops.mul(per_frame, scale)


def forward_tensors(noisy: AudioBuffer, visual: Optional[VisualEmbeddingSequence], cfg: ModelConfig,
                    params: Params, hooks: ForwardHooks = ForwardHooks()) -> ForwardOutput:
    """
    Full enhancement graph. Recorded on the active tape, if any, so training calls this directly.
    """
    if noisy.sample_rate != cfg.sample_rate:
        raise ConfigError(f"audio is {noisy.sample_rate} Hz, model expects {cfg.sample_rate} Hz")
    c = cfg.stft.compression_exponent
    spec = stft(noisy, cfg.stft)
    n_frames = spec.frames
    magnitude_c = np.power(spec.magnitude, c)
    phase = np.arctan2(spec.imag, spec.real)

    mag_feat = ops.silu(ops.conv2d(Tensor(magnitude_c[None]), params["front.mag.weight"], params["front.mag.bias"]))
    phase_in = Tensor(np.stack([np.cos(phase), np.sin(phase)]))
    phase_feat = ops.silu(ops.conv2d(phase_in, params["front.phase.weight"], params["front.phase.bias"]))
    audio_feat = ops.concat([mag_feat, phase_feat], axis=0)

    hidden = ops.conv2d(audio_feat, params["encoder.conv1.audio.weight"])
    if cfg.use_visual and visual is not None:
        visual_feat = _visual_features(visual, n_frames, cfg, params)
        hidden = ops.add(hidden, ops.conv2d(visual_feat, params["encoder.conv1.visual.weight"]))
    hidden = ops.silu(ops.add(hidden, _channel_bias(params["encoder.conv1.bias"])))
    hidden = ops.silu(ops.conv2d(hidden, params["encoder.conv2.weight"], params["encoder.conv2.bias"], dilation=(1, 2)))

    sequence = ops.transpose(hidden, (1, 2, 0))
    for block in tf_blocks(params, cfg):
        sequence = tf_block_forward(sequence, block, causal=cfg.causal, chunk_size=cfg.scan_chunk)
    decoded = ops.transpose(sequence, (2, 0, 1))

    if hooks.identity_mask:
        mask = Tensor(np.ones_like(magnitude_c))
    else:
        mag_hidden = ops.silu(ops.conv2d(decoded, params["mag_decoder.conv.weight"], params["mag_decoder.conv.bias"]))
        logits = ops.conv2d(mag_hidden, params["mag_decoder.out.weight"], params["mag_decoder.out.bias"])
        squashed = ops.sigmoid(ops.reshape(logits, magnitude_c.shape))
        mask = ops.add(ops.mul(squashed, 2.0 - 2.0 * MASK_EPS), MASK_EPS)
    enhanced_mag_c = ops.mul(mask, magnitude_c)

    if hooks.passthrough_phase:
        enhanced_phase = Tensor(phase)
    else:
        phase_hidden = ops.silu(
            ops.conv2d(decoded, params["phase_decoder.conv.weight"], params["phase_decoder.conv.bias"])
        )
        pair = ops.conv2d(phase_hidden, params["phase_decoder.out.weight"], params["phase_decoder.out.bias"])
        enhanced_phase = ops.atan2(pair[1], pair[0])

    enhanced = from_compressed_polar(enhanced_mag_c, enhanced_phase, c)
    waveform = istft_tensor(enhanced, cfg.stft, len(noisy))
    return ForwardOutput(waveform=waveform, spectrogram=enhanced, mask=mask, noisy=spec)


def forward(noisy: AudioBuffer, visual: Optional[VisualEmbeddingSequence], cfg: ModelConfig, params: Params,
            hooks: ForwardHooks = ForwardHooks()):
    """
    Inference entry point.

    Returns:
        (AudioBuffer, Spectrogram): the enhanced waveform, exactly len(noisy) samples, and the
        predicted spectrogram.
    """
    if visual is not None and visual.dim != cfg.visual_dim:
        raise ShapeError(f"visual embeddings have dim {visual.dim}, model expects {cfg.visual_dim}")
    out = forward_tensors(noisy, visual, cfg, params, hooks)
    return AudioBuffer(out.waveform.data, noisy.sample_rate), out.spectrogram.detach()
