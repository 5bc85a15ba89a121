"""
Mamba blocks built from autodiff ops, so the same code serves inference and training.

Sequences run along axis -2 of an (..., L, d_model) input; leading axes are batch.
"""
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from autodiff import ops
from autodiff.tensor import Tensor, as_tensor
from utils.exceptions import DomainError, ShapeError

DT_MIN = 1e-3
DT_MAX = 1e-1

_BLOCK_FIELDS = ("in_proj", "conv_w", "conv_b", "x_proj", "dt_proj_w", "dt_proj_b", "A_log", "D_skip", "out_proj")


def dt_rank_for(d_model: int) -> int:
    return math.ceil(d_model / 16)


@dataclass(eq=False)
class MambaBlockParams:
    """
    Weights of one unidirectional Mamba block. Projections are stored (d_in, d_out).

    in_proj: (d_model, 2 * d_inner)     conv_w: (d_inner, d_conv)   conv_b: (d_inner,)
    x_proj: (d_inner, dt_rank + 2 * d_state)
    dt_proj_w: (dt_rank, d_inner)       dt_proj_b: (d_inner,)
    A_log: (d_inner, d_state)           D_skip: (d_inner,)          out_proj: (d_inner, d_model)
    """
    in_proj: Tensor
    conv_w: Tensor
    conv_b: Tensor
    x_proj: Tensor
    dt_proj_w: Tensor
    dt_proj_b: Tensor
    A_log: Tensor
    D_skip: Tensor
    out_proj: Tensor

    def __post_init__(self):
        d_model, d_inner, d_state, dt_rank = self.d_model, self.d_inner, self.d_state, self.dt_rank
        expected = {
            "in_proj": (d_model, 2 * d_inner),
            "conv_w": (d_inner, self.d_conv),
            "conv_b": (d_inner,),
            "x_proj": (d_inner, dt_rank + 2 * d_state),
            "dt_proj_w": (dt_rank, d_inner),
            "dt_proj_b": (d_inner,),
            "A_log": (d_inner, d_state),
            "D_skip": (d_inner,),
            "out_proj": (d_inner, d_model),
        }
        for name, shape in expected.items():
            tensor = getattr(self, name)
            if tensor.shape != shape:
                raise ShapeError(f"{name} must be {shape}, got {tensor.shape}")
            if not np.all(np.isfinite(tensor.data)):
                raise DomainError(f"{name} has non-finite entries")

    @property
    def d_model(self) -> int:
        return self.in_proj.shape[0]

    @property
    def d_inner(self) -> int:
        return self.out_proj.shape[0]

    @property
    def d_state(self) -> int:
        return self.A_log.shape[1]

    @property
    def d_conv(self) -> int:
        return self.conv_w.shape[1]

    @property
    def dt_rank(self) -> int:
        return self.dt_proj_w.shape[0]

    def tensors(self, prefix: str = "") -> Dict[str, Tensor]:
        return {f"{prefix}{name}": getattr(self, name) for name in _BLOCK_FIELDS}

    @classmethod
    def from_tensors(cls, tensors: Dict[str, Tensor], prefix: str = "") -> "MambaBlockParams":
        return cls(**{name: tensors[f"{prefix}{name}"] for name in _BLOCK_FIELDS})


@dataclass(eq=False)
class BidirectionalParams:
    fwd: MambaBlockParams
    bwd: MambaBlockParams
    merge: Tensor

    def tensors(self, prefix: str = "") -> Dict[str, Tensor]:
        out = self.fwd.tensors(f"{prefix}fwd.")
        out.update(self.bwd.tensors(f"{prefix}bwd."))
        out[f"{prefix}merge"] = self.merge
        return out

    @classmethod
    def from_tensors(cls, tensors, prefix: str = "") -> "BidirectionalParams":
        return cls(
            fwd=MambaBlockParams.from_tensors(tensors, f"{prefix}fwd."),
            bwd=MambaBlockParams.from_tensors(tensors, f"{prefix}bwd."),
            merge=tensors[f"{prefix}merge"],
        )


@dataclass(eq=False)
class TFBlockParams:
    time: BidirectionalParams
    freq: BidirectionalParams
    time_norm_gamma: Tensor
    time_norm_beta: Tensor
    freq_norm_gamma: Tensor
    freq_norm_beta: Tensor

    def tensors(self, prefix: str = "") -> Dict[str, Tensor]:
        out = self.time.tensors(f"{prefix}time.")
        out.update(self.freq.tensors(f"{prefix}freq."))
        out[f"{prefix}time_norm.gamma"] = self.time_norm_gamma
        out[f"{prefix}time_norm.beta"] = self.time_norm_beta
        out[f"{prefix}freq_norm.gamma"] = self.freq_norm_gamma
        out[f"{prefix}freq_norm.beta"] = self.freq_norm_beta
        return out

    @classmethod
    def from_tensors(cls, tensors, prefix: str = "") -> "TFBlockParams":
        return cls(
            time=BidirectionalParams.from_tensors(tensors, f"{prefix}time."),
            freq=BidirectionalParams.from_tensors(tensors, f"{prefix}freq."),
            time_norm_gamma=tensors[f"{prefix}time_norm.gamma"],
            time_norm_beta=tensors[f"{prefix}time_norm.beta"],
            freq_norm_gamma=tensors[f"{prefix}freq_norm.gamma"],
            freq_norm_beta=tensors[f"{prefix}freq_norm.beta"],
        )


def _uniform(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_mamba_params(rng: np.random.Generator, d_model: int, d_state: int = 16, d_conv: int = 4,
                      expand: int = 2, dt_min: float = DT_MIN, dt_max: float = DT_MAX) -> MambaBlockParams:
    """
    Fresh block weights.

    A_log starts at log([1..d_state]) for every channel; the dt_proj bias is the inverse
    softplus of a log-uniform draw from [dt_min, dt_max], so the initial step sizes land there.
    """
    d_inner = expand * d_model
    dt_rank = dt_rank_for(d_model)
    dt = np.exp(rng.uniform(math.log(dt_min), math.log(dt_max), size=d_inner))
    dt_bias = dt + np.log(-np.expm1(-dt))
    return MambaBlockParams(
        in_proj=_uniform(rng, (d_model, 2 * d_inner), d_model),
        conv_w=_uniform(rng, (d_inner, d_conv), d_conv),
        conv_b=Tensor(np.zeros(d_inner), requires_grad=True),
        x_proj=_uniform(rng, (d_inner, dt_rank + 2 * d_state), d_inner),
        dt_proj_w=_uniform(rng, (dt_rank, d_inner), dt_rank),
        dt_proj_b=Tensor(dt_bias, requires_grad=True),
        A_log=Tensor(np.log(np.tile(np.arange(1, d_state + 1, dtype=np.float64), (d_inner, 1))), requires_grad=True),
        D_skip=Tensor(np.ones(d_inner), requires_grad=True),
        out_proj=_uniform(rng, (d_inner, d_model), d_inner),
    )


def init_bidirectional_params(rng, d_model: int, **block_kwargs) -> BidirectionalParams:
    return BidirectionalParams(
        fwd=init_mamba_params(rng, d_model, **block_kwargs),
        bwd=init_mamba_params(rng, d_model, **block_kwargs),
        merge=_uniform(rng, (2 * d_model, d_model), 2 * d_model),
    )


def init_tf_block_params(rng, d_model: int, **block_kwargs) -> TFBlockParams:
    ones = lambda: Tensor(np.ones(d_model), requires_grad=True)  # noqa: E731
    zeros = lambda: Tensor(np.zeros(d_model), requires_grad=True)  # noqa: E731
    return TFBlockParams(
        time=init_bidirectional_params(rng, d_model, **block_kwargs),
        freq=init_bidirectional_params(rng, d_model, **block_kwargs),
        time_norm_gamma=ones(),
        time_norm_beta=zeros(),
        freq_norm_gamma=ones(),
        freq_norm_beta=zeros(),
    )


def mamba_block_forward(x, p: MambaBlockParams, chunk_size: Optional[int] = None) -> Tensor:
    x = as_tensor(x)
    if x.ndim < 2 or x.shape[-1] != p.d_model:
        raise ShapeError(f"mamba block expects (..., L, {p.d_model}), got {x.shape}")
    if x.shape[-2] < 1:
        raise ShapeError("mamba block needs L >= 1")
    d_inner, d_state, dt_rank = p.d_inner, p.d_state, p.dt_rank

    xz = ops.linear(x, p.in_proj)
    u = xz[..., :d_inner]
    z = xz[..., d_inner:]
    u = ops.silu(ops.conv1d_depthwise(u, p.conv_w, p.conv_b))

    proj = ops.linear(u, p.x_proj)
    dt = proj[..., :dt_rank]
    B = proj[..., dt_rank:dt_rank + d_state]
    C = proj[..., dt_rank + d_state:]
    delta = ops.softplus(ops.linear(dt, p.dt_proj_w, p.dt_proj_b))
    A = ops.neg(ops.exp(p.A_log))

    y = ops.scan_custom(u, delta, A, B, C, p.D_skip, chunk_size)
    return ops.linear(ops.mul(y, ops.silu(z)), p.out_proj)


def bidirectional_mamba(x, params: BidirectionalParams, causal: bool = False,
                        chunk_size: Optional[int] = None) -> Tensor:
    """merge @ [fwd(x); reverse(bwd(reverse(x)))]. With causal=True only the forward half of merge is used."""
    x = as_tensor(x)
    forward = mamba_block_forward(x, params.fwd, chunk_size)
    if causal:
        return ops.linear(forward, params.merge[:params.fwd.d_model])
    backward = ops.flip(mamba_block_forward(ops.flip(x, -2), params.bwd, chunk_size), -2)
    return ops.linear(ops.concat([forward, backward], axis=-1), params.merge)


def time_subblock(x, params: TFBlockParams, causal: bool = False, chunk_size: Optional[int] = None) -> Tensor:
    """x + time_mamba(norm(x)) with every frequency bin an independent sequence; x is (T, F, d)."""
    x = as_tensor(x)
    normed = ops.layer_norm(x, params.time_norm_gamma, params.time_norm_beta)
    per_bin = ops.transpose(normed, (1, 0, 2))
    mixed = bidirectional_mamba(per_bin, params.time, causal=causal, chunk_size=chunk_size)
    return ops.add(x, ops.transpose(mixed, (1, 0, 2)))


def freq_subblock(x, params: TFBlockParams, chunk_size: Optional[int] = None) -> Tensor:
    """x + freq_mamba(norm(x)) with every frame an independent sequence over bins."""
    x = as_tensor(x)
    normed = ops.layer_norm(x, params.freq_norm_gamma, params.freq_norm_beta)
    return ops.add(x, bidirectional_mamba(normed, params.freq, chunk_size=chunk_size))


def tf_block_forward(x, params: TFBlockParams, causal: bool = False, chunk_size: Optional[int] = None) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 3 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ShapeError(f"tf block expects (T, F, d_model) with T, F >= 1, got {x.shape}")
    if x.shape[-1] != params.time.fwd.d_model:
        raise ShapeError(f"tf block expects d_model={params.time.fwd.d_model}, got {x.shape[-1]}")
    return freq_subblock(time_subblock(x, params, causal, chunk_size), params, chunk_size)
