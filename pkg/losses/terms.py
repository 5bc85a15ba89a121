"""
The five training-loss terms and their weighted sum.

Predictions may be Tensors (training) or plain AudioBuffer/Spectrogram values; targets
are always treated as constants.
"""
from typing import Dict, Optional, Tuple, Union

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor
from dsp.differentiable import (
    MAGNITUDE_EPS, TensorSpectrogram, compressed_cartesian, frames_tensor, istft_tensor, magnitude_tensor,
    overlap_add_tensor, stft_tensor,
)
from dsp.types import AudioBuffer, Spectrogram, StftConfig
from utils.exceptions import LengthMismatch, ShapeError
from .weights import LossWeights

Waveform = Union[Tensor, AudioBuffer, np.ndarray]
AnySpectrogram = Union[TensorSpectrogram, Spectrogram]


def _waveform(value: Waveform) -> Tensor:
    if isinstance(value, Tensor):
        return value
    if isinstance(value, AudioBuffer):
        return Tensor(value.samples)
    return Tensor(np.asarray(value, dtype=np.float64))


def _spectrogram(value: AnySpectrogram) -> TensorSpectrogram:
    if isinstance(value, TensorSpectrogram):
        return value
    return TensorSpectrogram.constant(value)


def _check_same_shape(estimate: TensorSpectrogram, target: TensorSpectrogram):
    if estimate.shape != target.shape:
        raise ShapeError(f"spectrogram shapes differ: {estimate.shape} vs {target.shape}")


def _compressed_magnitude(spec: TensorSpectrogram, c: float) -> Tensor:
    if spec.compressed_mag is not None:
        return spec.compressed_mag
    return ops.power(magnitude_tensor(spec, MAGNITUDE_EPS), c)


def _compressed_parts(spec: TensorSpectrogram, c: float) -> TensorSpectrogram:
    if spec.compressed_mag is not None and spec.phase is not None:
        return TensorSpectrogram(
            ops.mul(spec.compressed_mag, ops.cos(spec.phase)),
            ops.mul(spec.compressed_mag, ops.sin(spec.phase)),
        )
    return compressed_cartesian(spec, c)


def _phase(spec: TensorSpectrogram) -> Tensor:
    return spec.phase if spec.phase is not None else ops.atan2(spec.imag, spec.real)


def _complex_mse(a: TensorSpectrogram, b: TensorSpectrogram) -> Tensor:
    """Mean over bins of |a - b|^2 = (re_a - re_b)^2 + (im_a - im_b)^2."""
    return ops.mean(ops.add(ops.square(ops.sub(a.real, b.real)), ops.square(ops.sub(a.imag, b.imag))))


def loss_time(yhat: Waveform, y: Waveform) -> Tensor:
    yhat, y = _waveform(yhat), _waveform(y)
    if yhat.shape != y.shape:
        raise LengthMismatch(f"waveform lengths differ: {yhat.shape} vs {y.shape}")
    return ops.mean(ops.abs(ops.sub(yhat, y)))


def loss_magnitude(estimate: AnySpectrogram, target: AnySpectrogram, c: float) -> Tensor:
    estimate, target = _spectrogram(estimate), _spectrogram(target)
    _check_same_shape(estimate, target)
    diff = ops.sub(_compressed_magnitude(estimate, c), _compressed_magnitude(target, c))
    return ops.mean(ops.square(diff))


def loss_complex(estimate: AnySpectrogram, target: AnySpectrogram, c: float) -> Tensor:
    estimate, target = _spectrogram(estimate), _spectrogram(target)
    _check_same_shape(estimate, target)
    return _complex_mse(_compressed_parts(estimate, c), _compressed_parts(target, c))


def loss_phase(estimate: AnySpectrogram, target: AnySpectrogram, variant: str = "anti_wrap") -> Tensor:
    """
    anti_wrap: instantaneous phase + time-axis group delay + frequency-axis
    instantaneous-frequency terms, each the mean anti-wrapped difference.
    cosine: mean(1 - cos(phase difference)).

    A difference term along an axis of length 1 has no entries and is left out.
    """
    estimate, target = _spectrogram(estimate), _spectrogram(target)
    _check_same_shape(estimate, target)
    est_phase, ref_phase = _phase(estimate), _phase(target)
    diff = ops.sub(est_phase, ref_phase)
    if variant == "cosine":
        return ops.mean(ops.sub(1.0, ops.cos(diff)))

    total = ops.mean(ops.anti_wrap(diff))
    n_frames, n_bins = est_phase.shape
    if n_frames > 1:
        group_delay = ops.sub(diff[1:, :], diff[:-1, :])
        total = ops.add(total, ops.mean(ops.anti_wrap(group_delay)))
    if n_bins > 1:
        inst_freq = ops.sub(diff[:, 1:], diff[:, :-1])
        total = ops.add(total, ops.mean(ops.anti_wrap(inst_freq)))
    return total


def loss_consistency(estimate: AnySpectrogram, cfg: StftConfig, out_len: Optional[int] = None) -> Tensor:
    """
    Distance between a spectrogram and its projection onto the set of spectrograms some
    waveform can produce, in the compressed domain.

    With `out_len` the projection is stft(istft(., out_len)), the waveform the enhancer
    actually emits. Without it the projection stays in padded coordinates: overlap-add over
    the full frame span, then plain re-framing, so no reflect padding of a guessed length
    enters and any stft output scores zero.
    """
    estimate = _spectrogram(estimate)
    if estimate.bins != cfg.n_bins:
        raise ShapeError(f"spectrogram has {estimate.bins} bins, config expects {cfg.n_bins}")
    if out_len is None:
        projected = frames_tensor(overlap_add_tensor(estimate, cfg), cfg)
    else:
        projected = stft_tensor(istft_tensor(estimate, cfg, out_len), cfg)
    _check_same_shape(projected, estimate)
    c = cfg.compression_exponent
    return _complex_mse(_compressed_parts(estimate, c), compressed_cartesian(projected, c))


def total_loss(yhat: Waveform, y: Waveform, estimate: AnySpectrogram, target: AnySpectrogram,
               weights: LossWeights, cfg: StftConfig) -> Tuple[Tensor, Dict[str, float]]:
    """
    Weighted sum of the five terms. Terms whose weight is zero are not evaluated.

    Returns:
        (Tensor, dict): the scalar total and the unweighted value of every evaluated term.
    """
    c = cfg.compression_exponent
    y_len = _waveform(y).shape[0]
    evaluators = {
        "time": lambda: loss_time(yhat, y),
        "magnitude": lambda: loss_magnitude(estimate, target, c),
        "complex": lambda: loss_complex(estimate, target, c),
        "phase": lambda: loss_phase(estimate, target, weights.phase_loss),
        "consistency": lambda: loss_consistency(estimate, cfg, out_len=y_len),
    }
    total = Tensor(np.zeros(()))
    breakdown = {}
    for name, weight in weights.as_terms().items():
        if weight == 0:
            continue
        value = evaluators[name]()
        breakdown[name] = value.item()
        total = ops.add(total, ops.mul(value, weight))
    return total, breakdown
