"""
Selective state-space scan kernels on plain numpy arrays.

Per channel d and state dimension n:
    h_t = exp(delta_t[d] * A[d, n]) * h_{t-1} + delta_t[d] * B_t[n] * u_t[d],   h_{-1} = 0
    y_t[d] = sum_n C_t[n] * h_t[d, n] + D[d] * u_t[d]

u and delta are (..., L, d_inner); B and C are (..., L, d_state); A is (d_inner, d_state)
and D is (d_inner,). Leading axes are independent sequences.
"""
from dataclasses import dataclass

import numpy as np

from utils.exceptions import DomainError, ShapeError

DEFAULT_SCAN_CHUNK = 32


@dataclass(frozen=True, eq=False)
class ScanInputs:
    u: np.ndarray
    delta: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        for field_name in ("u", "delta", "B", "C"):
            object.__setattr__(self, field_name, np.asarray(getattr(self, field_name)))
        _check_sequence(self.u, self.delta, self.B, self.C)

    @property
    def length(self) -> int:
        return self.u.shape[-2]


def _check_sequence(u, delta, B, C):
    if u.ndim < 2 or u.shape != delta.shape:
        raise ShapeError(f"u {u.shape} and delta {delta.shape} must share an (..., L, d_inner) shape")
    if u.shape[-2] < 1:
        raise ShapeError("scan needs at least one time step")
    if B.shape != C.shape or B.shape[:-1] != u.shape[:-1]:
        raise ShapeError(f"B {B.shape} and C {C.shape} must be (..., L, d_state) matching u {u.shape}")
    if not np.all(delta > 0):
        raise DomainError("delta must be strictly positive")


def _check_params(u, B, A, D):
    d_inner, d_state = u.shape[-1], B.shape[-1]
    if A.shape != (d_inner, d_state):
        raise ShapeError(f"A must be {(d_inner, d_state)}, got {A.shape}")
    if D.shape != (d_inner,):
        raise ShapeError(f"D must be {(d_inner,)}, got {D.shape}")


def _validate(u, delta, A, B, C, D):
    arrays = [np.asarray(a) for a in (u, delta, A, B, C, D)]
    u, delta, A, B, C, D = arrays
    _check_sequence(u, delta, B, C)
    _check_params(u, B, A, D)
    return arrays


def _result_dtype(*arrays):
    return np.result_type(np.float32, *arrays)


def selective_scan_seq(inputs: ScanInputs, A, D) -> np.ndarray:
    """Step-by-step recurrence in float64. Reference implementation for the fast kernel."""
    u, delta, A, B, C, D = _validate(inputs.u, inputs.delta, A, inputs.B, inputs.C, D)
    dtype = _result_dtype(u, delta, A, B, C, D)
    u, delta, A, B, C, D = (a.astype(np.float64) for a in (u, delta, A, B, C, D))

    h = np.zeros(u.shape[:-2] + A.shape)
    y = np.empty(u.shape)
    for t in range(u.shape[-2]):
        h = np.exp(delta[..., t, :, None] * A) * h + (delta[..., t, :] * u[..., t, :])[..., None] * B[..., t, None, :]
        y[..., t, :] = np.sum(h * C[..., t, None, :], axis=-1) + D * u[..., t, :]
    return y.astype(dtype, copy=False)


def selective_scan_fast(inputs: ScanInputs, A, D, chunk_size: int = DEFAULT_SCAN_CHUNK) -> np.ndarray:
    """Same contract as selective_scan_seq, evaluated chunk-wise with a parallel prefix scan."""
    A, D = np.asarray(A), np.asarray(D)
    _check_params(inputs.u, inputs.B, A, D)
    if inputs.length == 1:
        return selective_scan_seq(inputs, A, D)
    return scan_forward(inputs.u, inputs.delta, A, inputs.B, inputs.C, D, chunk_size)


def _prefix_scan(a, b, carry):
    """
    Inclusive scan of h_k = a_k * h_{k-1} + b_k along axis 1 with h_{-1} = carry.

    a, b: (batch, K, d_inner, d_state); carry: (batch, d_inner, d_state).
    Pairs compose as (a1, b1) then (a2, b2) -> (a1 * a2, a2 * b1 + b2); log2(K) doubling steps.
    """
    a = a.copy()
    b = b.copy()
    length = a.shape[1]
    offset = 1
    while offset < length:
        b_tail = a[:, offset:] * b[:, :-offset] + b[:, offset:]
        a_tail = a[:, offset:] * a[:, :-offset]
        b[:, offset:] = b_tail
        a[:, offset:] = a_tail
        offset *= 2
    return a * carry[:, None] + b


def _flatten(u, delta, B, C):
    batch_shape = u.shape[:-2]
    length, d_inner = u.shape[-2:]
    d_state = B.shape[-1]
    return (
        batch_shape,
        u.reshape(-1, length, d_inner),
        delta.reshape(-1, length, d_inner),
        B.reshape(-1, length, d_state),
        C.reshape(-1, length, d_state),
    )


def _chunk_terms(u, delta, A, B, start, stop):
    a = np.exp(delta[:, start:stop, :, None] * A)
    b = (delta[:, start:stop] * u[:, start:stop])[..., None] * B[:, start:stop, None, :]
    return a, b


def _check_chunk(chunk_size):
    if int(chunk_size) < 1:
        raise ShapeError(f"chunk_size must be >= 1, got {chunk_size}")
    return int(chunk_size)


def scan_forward(u, delta, A, B, C, D, chunk_size: int = DEFAULT_SCAN_CHUNK) -> np.ndarray:
    """
    Chunked scan: a doubling prefix scan inside each chunk, a sequential carry across chunks.

    Memory is O(batch * chunk_size * d_inner * d_state). Results are deterministic for a
    fixed chunk size.
    """
    u, delta, A, B, C, D = _validate(u, delta, A, B, C, D)
    chunk_size = _check_chunk(chunk_size)
    dtype = _result_dtype(u, delta, A, B, C, D)
    batch_shape, u2, delta2, B2, C2 = _flatten(u, delta, B, C)
    n_seq, length, d_inner = u2.shape

    y = np.empty((n_seq, length, d_inner), dtype=dtype)
    carry = np.zeros((n_seq,) + A.shape, dtype=dtype)
    for start in range(0, length, chunk_size):
        stop = min(start + chunk_size, length)
        a, b = _chunk_terms(u2, delta2, A, B2, start, stop)
        h = _prefix_scan(a, b, carry)
        y[:, start:stop] = np.einsum("bkdn,bkn->bkd", h, C2[:, start:stop]) + D * u2[:, start:stop]
        carry = h[:, -1]
    return y.reshape(batch_shape + (length, d_inner))


def scan_backward(grad_y, u, delta, A, B, C, D, chunk_size: int = DEFAULT_SCAN_CHUNK):
    """
    Vector-Jacobian product of scan_forward.

    Hidden states are recomputed chunk by chunk from the carries at chunk boundaries, and
    the adjoint lam_t = grad_y_t * C_t + a_{t+1} * lam_{t+1} runs as the same prefix scan on
    time-reversed chunks.

    Returns:
        tuple: gradients for (u, delta, A, B, C, D), each shaped like its input.
    """
    u, delta, A, B, C, D = _validate(u, delta, A, B, C, D)
    chunk_size = _check_chunk(chunk_size)
    grad_y = np.asarray(grad_y)
    if grad_y.shape != u.shape:
        raise ShapeError(f"output gradient {grad_y.shape} does not match {u.shape}")
    dtype = _result_dtype(grad_y, u, delta, A, B, C, D)
    batch_shape, u2, delta2, B2, C2 = _flatten(u, delta, B, C)
    n_seq, length, d_inner = u2.shape
    g2 = grad_y.reshape(n_seq, length, d_inner)

    starts = list(range(0, length, chunk_size))
    carries = []
    carry = np.zeros((n_seq,) + A.shape, dtype=dtype)
    for start in starts:
        carries.append(carry)
        stop = min(start + chunk_size, length)
        a, b = _chunk_terms(u2, delta2, A, B2, start, stop)
        carry = _prefix_scan(a, b, carry)[:, -1]

    grad_u = np.zeros((n_seq, length, d_inner), dtype=dtype)
    grad_delta = np.zeros_like(grad_u)
    grad_B = np.zeros((n_seq, length, B.shape[-1]), dtype=dtype)
    grad_C = np.zeros_like(grad_B)
    grad_A = np.zeros(A.shape, dtype=dtype)
    grad_D = np.zeros(D.shape, dtype=dtype)

    lam_following = np.zeros((n_seq,) + A.shape, dtype=dtype)
    a_following = np.zeros_like(lam_following)
    for index in reversed(range(len(starts))):
        start = starts[index]
        stop = min(start + chunk_size, length)
        a, b = _chunk_terms(u2, delta2, A, B2, start, stop)
        h = _prefix_scan(a, b, carries[index])
        h_prev = np.concatenate([carries[index][:, None], h[:, :-1]], axis=1)

        g = g2[:, start:stop]
        emitted = g[..., None] * C2[:, start:stop, None, :]
        a_next = np.concatenate([a[:, 1:], a_following[:, None]], axis=1)
        lam = _prefix_scan(a_next[:, ::-1], emitted[:, ::-1], lam_following)[:, ::-1]

        grad_log_a = lam * h_prev * a
        u_c, delta_c, B_c = u2[:, start:stop], delta2[:, start:stop], B2[:, start:stop]
        lam_B = np.einsum("bkdn,bkn->bkd", lam, B_c)

        grad_delta[:, start:stop] = np.einsum("bkdn,dn->bkd", grad_log_a, A) + lam_B * u_c
        grad_A += np.einsum("bkdn,bkd->dn", grad_log_a, delta_c)
        grad_B[:, start:stop] = np.einsum("bkdn,bkd->bkn", lam, delta_c * u_c)
        grad_u[:, start:stop] = lam_B * delta_c + g * D
        grad_C[:, start:stop] = np.einsum("bkd,bkdn->bkn", g, h)
        grad_D += np.einsum("bkd,bkd->d", g, u_c)

        lam_following = lam[:, 0]
        a_following = a[:, 0]

    return (
        grad_u.reshape(u.shape),
        grad_delta.reshape(delta.shape),
        grad_A,
        grad_B.reshape(B.shape),
        grad_C.reshape(C.shape),
        grad_D,
    )
