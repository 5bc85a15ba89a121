import numpy as np

from utils.exceptions import DomainError, ShapeError
from .tensor import Tensor, as_tensor, record

# keeps atan2's adjoint finite when both arguments vanish
ATAN2_FLOOR = 1e-24


def unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sums `grad` over the axes numpy broadcasting added or stretched to reach `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"cannot broadcast {a.shape} with {b.shape}") from exc


# elementwise binary

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return record("add", a.data + b.data, (a, b),
                  lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return record("sub", a.data - b.data, (a, b),
                  lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return record("mul", a.data * b.data, (a, b),
                  lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    out = a.data / b.data

    def backward(g):
        return unbroadcast(g / b.data, a.shape), unbroadcast(-g * out / b.data, b.shape)

    return record("div", out, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return record("neg", -a.data, (a,), lambda g: (-g,))


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    exponent = float(exponent)
    if not exponent.is_integer() and np.any(a.data < 0):
        raise DomainError(f"non-integer power {exponent} of a negative value")
    out = np.power(a.data, exponent)

    def backward(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            local = exponent * np.power(a.data, exponent - 1.0)
        return (g * np.where(np.isfinite(local), local, 0.0),)

    return record("power", out, (a,), backward)


# contractions

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >= 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def backward(g):
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return unbroadcast(grad_a, a.shape), unbroadcast(grad_b, b.shape)

    return record("matmul", out, (a, b), backward)


# elementwise unary

def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return record("exp", out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("log of a non-positive value")
    return record("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise DomainError("sqrt of a negative value")
    out = np.sqrt(a.data)

    def backward(g):
        with np.errstate(divide="ignore"):
            local = np.where(out > 0, 0.5 / np.where(out > 0, out, 1.0), 0.0)
        return (g * local,)

    return record("sqrt", out, (a,), backward)


def abs(a) -> Tensor:
    a = as_tensor(a)
    return record("abs", np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def sin(a) -> Tensor:
    a = as_tensor(a)
    return record("sin", np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


def cos(a) -> Tensor:
    a = as_tensor(a)
    return record("cos", np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),))


def atan2(y, x) -> Tensor:
    """Angle of (x, y) in [-pi, pi]; d/dy = x / r^2, d/dx = -y / r^2."""
    y, x = as_tensor(y), as_tensor(x)
    _broadcast_shape(y, x)
    out = np.arctan2(y.data, x.data)

    def backward(g):
        radius_sq = np.maximum(x.data * x.data + y.data * y.data, ATAN2_FLOOR)
        return unbroadcast(g * x.data / radius_sq, y.shape), unbroadcast(-g * y.data / radius_sq, x.shape)

    return record("atan2", out, (y, x), backward)


def _sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    e = np.exp(x[~positive])
    out[~positive] = e / (1.0 + e)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return record("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a) -> Tensor:
    a = as_tensor(a)
    return record("softplus", np.logaddexp(0.0, a.data), (a,), lambda g: (g * _sigmoid(a.data),))


def silu(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.data)
    return record("silu", a.data * s, (a,), lambda g: (g * (s + a.data * s * (1.0 - s)),))


def anti_wrap(a) -> Tensor:
    """aw(x) = |x - 2*pi*round(x / 2*pi)|: distance of an angle difference from the nearest full turn."""
    a = as_tensor(a)
    wrapped = a.data - 2.0 * np.pi * np.round(a.data / (2.0 * np.pi))
    return record("anti_wrap", np.abs(wrapped), (a,), lambda g: (g * np.sign(wrapped),))


# reductions and shape plumbing

def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def sum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    out = np.sum(a.data, axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return record("sum", out, (a,), backward)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    return mul(sum(a, axis=axes, keepdims=keepdims), 1.0 / count)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {a.shape} to {shape}") from exc
    return record("reshape", out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return record("transpose", np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    out = a.data[index]
    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis for p in parts)

    def backward(g):
        grad = np.zeros_like(a.data)
        if basic:
            grad[index] += g
        else:
            np.add.at(grad, index, g)
        return (grad,)

    return record("slice", np.array(out, copy=True), (a,), backward)


def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"cannot concatenate shapes {[t.shape for t in tensors]}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return record("concat", out, tensors, backward)


def flip(a, axis) -> Tensor:
    """Reverses `a` along `axis`."""
    a = as_tensor(a)
    return record("reverse", np.flip(a.data, axis=axis).copy(), (a,),
                  lambda g: (np.flip(g, axis=axis).copy(),))


def take(a, index: np.ndarray) -> Tensor:
    """Gathers entries of a 1-D tensor; the adjoint scatter-adds with bincount (deterministic order)."""
    a = as_tensor(a)
    if a.ndim != 1:
        raise ShapeError(f"take gathers from 1-D tensors, got {a.shape}")
    index = np.asarray(index)

    def backward(g):
        return (np.bincount(index.ravel(), weights=g.ravel(), minlength=a.shape[0]).astype(a.dtype),)

    return record("gather", a.data[index], (a,), backward)


def scatter_add(a, index: np.ndarray, length: int) -> Tensor:
    """out[k] = sum of a[i] over all i with index[i] == k; adjoint of take."""
    a = as_tensor(a)
    index = np.asarray(index)
    if index.shape != a.shape:
        raise ShapeError(f"scatter index {index.shape} does not match values {a.shape}")
    out = np.bincount(index.ravel(), weights=a.data.ravel(), minlength=length)[:length]
    return record("scatter_add", out, (a,), lambda g: (g[index],))


# convolutions

def conv1d_depthwise(x, weight, bias=None) -> Tensor:
    """
    Causal depthwise convolution along the sequence axis.

    x: (..., L, C), weight: (C, K), bias: (C,) or None.
    y[t, c] = sum_k weight[c, k] * x[t - (K - 1) + k, c] + bias[c], zero history before t = 0.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    channels, kernel = weight.shape
    if x.shape[-1] != channels:
        raise ShapeError(f"conv1d_depthwise: input has {x.shape[-1]} channels, kernel {channels}")
    length = x.shape[-2]
    pad = [(0, 0)] * x.ndim
    pad[-2] = (kernel - 1, 0)
    padded = np.pad(x.data, pad)
    out = np.zeros_like(x.data)
    for k in range(kernel):
        out += padded[..., k:k + length, :] * weight.data[:, k]
    inputs = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        inputs.append(bias)

    def backward(g):
        grad_padded = np.zeros_like(padded)
        grad_w = np.zeros_like(weight.data)
        flat_g = g.reshape(-1, channels)
        for k in range(kernel):
            window = padded[..., k:k + length, :]
            grad_w[:, k] = np.einsum("nc,nc->c", window.reshape(-1, channels), flat_g)
            grad_padded[..., k:k + length, :] += g * weight.data[:, k]
        grads = [grad_padded[..., kernel - 1:, :], grad_w]
        if bias is not None:
            grads.append(flat_g.sum(axis=0))
        return grads

    return record("conv1d_depthwise", out, inputs, backward)


def conv2d(x, weight, bias=None, dilation=(1, 1)) -> Tensor:
    """
    'Same'-padded 2-D convolution of one feature map.

    x: (C_in, T, F), weight: (C_out, C_in, kT, kF) with odd kernel sizes, bias: (C_out,) or None.
    dilation: (dT, dF).
    """
    x, weight = as_tensor(x), as_tensor(weight)
    c_out, c_in, k_t, k_f = weight.shape
    if x.ndim != 3 or x.shape[0] != c_in:
        raise ShapeError(f"conv2d: input {x.shape} does not match kernel {weight.shape}")
    if k_t % 2 == 0 or k_f % 2 == 0:
        raise ShapeError(f"conv2d needs odd kernel sizes, got {(k_t, k_f)}")
    d_t, d_f = dilation
    p_t, p_f = d_t * (k_t - 1) // 2, d_f * (k_f - 1) // 2
    _, n_t, n_f = x.shape
    padded = np.pad(x.data, ((0, 0), (p_t, p_t), (p_f, p_f)))

    def window(array, i, j):
        return array[:, i * d_t:i * d_t + n_t, j * d_f:j * d_f + n_f]

    out = np.zeros((c_out, n_t, n_f), dtype=x.dtype)
    for i in range(k_t):
        for j in range(k_f):
            out += np.tensordot(weight.data[:, :, i, j], window(padded, i, j), axes=([1], [0]))
    inputs = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[:, None, None]
        inputs.append(bias)

    def backward(g):
        grad_padded = np.zeros_like(padded)
        grad_w = np.zeros_like(weight.data)
        for i in range(k_t):
            for j in range(k_f):
                grad_w[:, :, i, j] = np.tensordot(g, window(padded, i, j), axes=([1, 2], [1, 2]))
                window(grad_padded, i, j)[...] += np.tensordot(weight.data[:, :, i, j], g, axes=([0], [0]))
        grads = [grad_padded[:, p_t:p_t + n_t, p_f:p_f + n_f], grad_w]
        if bias is not None:
            grads.append(g.sum(axis=(1, 2)))
        return grads

    return record("conv2d", out, inputs, backward)


# selective scan with a hand-written adjoint

def scan_custom(u, delta, A, B, C, D, chunk_size=None) -> Tensor:
    """
    Selective state-space scan as a single tape node.

    Forward runs the chunked scan; backward recomputes hidden states chunk by chunk and
    runs the adjoint recurrence in reverse, so memory stays O(chunk) in the state size.
    """
    from ssm import scan as kernels

    u, delta, A, B, C, D = (as_tensor(t) for t in (u, delta, A, B, C, D))
    chunk_size = chunk_size or kernels.DEFAULT_SCAN_CHUNK
    out = kernels.scan_forward(u.data, delta.data, A.data, B.data, C.data, D.data, chunk_size)

    def backward(g):
        return kernels.scan_backward(g, u.data, delta.data, A.data, B.data, C.data, D.data, chunk_size)

    return record("scan_custom", out, (u, delta, A, B, C, D), backward)


# composites

def square(a) -> Tensor:
    a = as_tensor(a)
    return mul(a, a)


def layer_norm(x, gamma, beta, eps=1e-5) -> Tensor:
    """Normalizes over the last axis, then scales by gamma and shifts by beta."""
    mu = mean(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    variance = mean(square(centered), axis=-1, keepdims=True)
    return add(mul(div(centered, sqrt(add(variance, eps))), gamma), beta)


def linear(x, weight, bias=None) -> Tensor:
    """x @ weight (+ bias); weight is stored (d_in, d_out)."""
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out
