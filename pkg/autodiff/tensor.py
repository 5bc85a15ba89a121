"""
Define-by-run reverse-mode differentiation over dense numpy arrays.

A Tape is opened with ``with Tape() as tape:``; every op executed inside it whose
inputs require gradients appends one Node. ``tape.backward(loss)`` then walks the
nodes in exact reverse recording order. Outside any tape, ops are plain numpy and
record nothing, which keeps inference thread-safe.
"""
import itertools
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from utils.exceptions import ContractError, ShapeError

_node_ids = itertools.count(1)
_active_tape: ContextVar[Optional["Tape"]] = ContextVar("avsem_active_tape", default=None)


class Tensor:
    __slots__ = ("data", "requires_grad", "node_id", "name")

    # numpy must hand mixed expressions back to our reflected operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        array = np.asarray(data)
        if array.dtype not in (np.float32, np.float64):
            array = array.astype(np.float64)
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_node_ids)
        self.name = name

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad}, node_id={self.node_id})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    # operator sugar; the ops module owns the maths
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __pow__(self, exponent):
        from . import ops
        return ops.power(self, exponent)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __rmatmul__(self, other):
        from . import ops
        return ops.matmul(other, self)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)


def as_tensor(value) -> Tensor:
    """Wraps arrays and scalars as constants; tensors pass through untouched."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


@dataclass
class Node:
    kind: str
    output_id: int
    inputs: Sequence[Tensor]
    backward_fn: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tape:
    """
    Records ops executed inside ``with tape:`` and replays their adjoints.

    A tape is single-owner: build it, call backward once or more, drop it.
    Independent training runs use independent tapes.
    """

    def __init__(self):
        self.nodes = []
        self._produced = set()
        self._token = None

    def __enter__(self):
        if self._token is not None:
            raise ContractError("tape is already active")
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _active_tape.reset(self._token)
        self._token = None
        return False

    def __len__(self):
        return len(self.nodes)

    def append(self, node: Node):
        self.nodes.append(node)
        self._produced.add(node.output_id)

    def backward(self, loss: Tensor) -> Dict[int, Tensor]:
        """
        Gradients of a scalar `loss` for every requires_grad leaf it depends on.

        Returns:
            dict: leaf node_id -> Tensor holding d(loss)/d(leaf). Leaves the loss does
            not depend on are absent; frozen tensors never appear.
        """
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            raise ContractError("loss is not connected to any tensor that requires grad")

        grads = {loss.node_id: np.ones_like(loss.data)}
        leaves = {}
        for node in reversed(self.nodes):
            upstream = grads.pop(node.output_id, None)
            if upstream is None:
                continue
            input_grads = node.backward_fn(upstream)
            for tensor, grad in zip(node.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if grad.shape != tensor.shape:
                    raise ShapeError(
                        f"{node.kind} backward produced grad {grad.shape} for input {tensor.shape}"
                    )
                if tensor.node_id in grads:
                    grads[tensor.node_id] = grads[tensor.node_id] + grad
                else:
                    grads[tensor.node_id] = grad
                if tensor.node_id not in self._produced:
                    leaves[tensor.node_id] = tensor

        return {node_id: Tensor(grads[node_id]) for node_id in leaves if node_id in grads}


def active_tape() -> Optional[Tape]:
    return _active_tape.get()


def record(kind: str, out_data, inputs: Sequence[Tensor], backward_fn) -> Tensor:
    """
    Wraps an op result; appends a Node when a tape is active and any input needs grad.

    `backward_fn(upstream)` must return one gradient (or None) per input, each shaped
    like that input.
    """
    tape = _active_tape.get()
    tracked = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=tracked)
    if tracked:
        tape.append(Node(kind, out.node_id, tuple(inputs), backward_fn))
    return out


def backward(loss: Tensor, tape: Optional[Tape] = None) -> Dict[int, Tensor]:
    tape = tape or _active_tape.get()
    if tape is None:
        raise ContractError("backward needs a tape; run the forward pass inside `with Tape():`")
    return tape.backward(loss)
