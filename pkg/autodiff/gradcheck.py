import numpy as np

from .tensor import Tape


def _evaluate(fn) -> float:
    return float(np.asarray(fn().data).reshape(()))


def gradcheck(fn, inputs, eps=1e-6, max_entries=None, rng=None, floor=1e-6):
    """
    Compares tape gradients of the scalar `fn()` with central finite differences.

    Args:
        fn: zero-argument callable building the graph from `inputs` and returning a scalar Tensor.
        inputs: tensors (requires_grad=True) whose gradients are checked; perturbed in place.
        eps (float): finite-difference step.
        max_entries (int): check at most this many randomly chosen entries per input.
        rng: numpy Generator used to pick entries.
        floor (float): denominator floor of the relative error.

    Returns:
        float: the largest relative error |analytic - numeric| / max(|analytic|, |numeric|, floor).
    """
    rng = rng or np.random.default_rng(0)
    with Tape() as tape:
        loss = fn()
    grads = tape.backward(loss)

    worst = 0.0
    for tensor in inputs:
        analytic = grads[tensor.node_id].data if tensor.node_id in grads else np.zeros_like(tensor.data)
        flat = tensor.data.reshape(-1)
        entries = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            entries = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        for entry in entries:
            original = flat[entry]
            flat[entry] = original + eps
            upper = _evaluate(fn)
            flat[entry] = original - eps
            lower = _evaluate(fn)
            flat[entry] = original
            numeric = (upper - lower) / (2.0 * eps)
            exact = analytic.reshape(-1)[entry]
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), floor)
            worst = max(worst, error)
    return worst
