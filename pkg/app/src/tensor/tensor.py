"""
Dense tensors and the reverse-mode differentiation tape.

Ops append a record to the active :class:`Tape` when grad mode is on and at
least one input requires a gradient.  Records are appended in execution order,
so walking the tape backwards is a valid reverse topological order and each
record is visited exactly once.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import NonFiniteError, ShapeError, TapeError

DTYPES = {"f32": np.dtype(np.float32), "f64": np.dtype(np.float64)}

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_grad_enabled = True


def resolve_dtype(dtype) -> np.dtype:
    if dtype is None:
        return DTYPES["f32"]
    if isinstance(dtype, str) and dtype in DTYPES:
        return DTYPES[dtype]
    resolved = np.dtype(dtype)
    if resolved not in DTYPES.values():
        raise TypeError(f"Unsupported dtype {dtype}; expected f32 or f64")
    return resolved


class Tensor:
    """
    Row-major numeric array that can take part in differentiation.

    ``grad`` is only ever populated on leaf tensors (tensors not produced by a
    recorded op) that require a gradient.
    """

    __array_priority__ = 100

    def __init__(self, data, dtype=None, requires_grad: bool = False, name: Optional[str] = None):
        if dtype is None and isinstance(data, np.ndarray) and data.dtype in DTYPES.values():
            dtype = data.dtype
        self.data: np.ndarray = np.array(data, dtype=resolve_dtype(dtype), copy=True)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._tape: Optional[Tape] = None
        self._generation = -1

    @classmethod
    def _wrap(cls, array: np.ndarray) -> "Tensor":
        tensor = cls.__new__(cls)
        tensor.data = array
        tensor.requires_grad = False
        tensor.grad = None
        tensor.name = None
        tensor._tape = None
        tensor._generation = -1
        return tensor

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype_name}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def dtype_name(self) -> str:
        return "f64" if self.data.dtype == np.float64 else "f32"

    @property
    def is_leaf(self) -> bool:
        return self._tape is None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # operator sugar; the ops themselves live in ops.py
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(ops.as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops

        return ops.div(self, other)

    def __neg__(self):
        from . import ops

        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops

        return ops.take(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        from . import ops

        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import ops

        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import ops

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops

        return ops.transpose(self, axes or None)

    @property
    def T(self):
        from . import ops

        return ops.swapaxes(self, -1, -2)

    def exp(self):
        from . import ops

        return ops.exp(self)

    def log(self):
        from . import ops

        return ops.log(self)


class _Record:
    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor, backward: BackwardFn):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Tape:
    """
    Ordered log of differentiable operations.

    Use as a context manager around one training step; leaving the context
    clears the tape, after which ``backward`` on its tensors is an error.
    """

    _active: Optional["Tape"] = None

    def __init__(self):
        self.records: List[_Record] = []
        self.generation = 0
        self._previous: Optional[Tape] = None

    def __enter__(self) -> "Tape":
        self._previous = Tape._active
        Tape._active = self
        return self

    def __exit__(self, *exc) -> None:
        self.clear()
        Tape._active = self._previous
        self._previous = None

    def __len__(self) -> int:
        return len(self.records)

    def clear(self) -> None:
        self.records.clear()
        self.generation += 1

    @classmethod
    def active(cls) -> Optional["Tape"]:
        return cls._active


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording, e.g. for inference on frozen weights"""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


def record(op: str, output: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """
    Wrap an op result and, when needed, append it to the active tape.

    ``backward`` maps the output gradient to one gradient per input (``None``
    for inputs that take no gradient); each gradient must have its input's shape.
    """
    if not np.all(np.isfinite(output)):
        raise NonFiniteError(f"{op} produced non-finite values")
    result = Tensor._wrap(np.asarray(output))
    tape = Tape._active
    if tape is not None and _grad_enabled and any(t.requires_grad for t in inputs):
        result.requires_grad = True
        result._tape = tape
        result._generation = tape.generation
        tape.records.append(_Record(op, tuple(inputs), result, backward))
    return result


def backward(loss: Tensor) -> None:
    """
    Populate ``.grad`` on every leaf reachable from ``loss``.

    Gradients accumulate additively, both across multiple uses of a tensor
    inside one graph and across repeated calls.
    """
    if loss.ndim != 0:
        raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if loss.is_leaf:
        if not loss.requires_grad:
            raise TapeError("loss was not produced on an active tape")
        _accumulate(loss, np.ones_like(loss.data))
        return
    tape = loss._tape
    if loss._generation != tape.generation:
        raise TapeError("loss belongs to a tape that has been cleared")

    pending = {id(loss): np.ones_like(loss.data)}
    for rec in reversed(tape.records):
        grad_out = pending.pop(id(rec.output), None)
        if grad_out is None:
            continue
        for tensor, grad in zip(rec.inputs, rec.backward(grad_out)):
            if grad is None or not tensor.requires_grad:
                continue
            if grad.shape != tensor.shape:
                raise ShapeError(
                    f"{rec.op} backward produced grad {grad.shape} for input {tensor.shape}"
                )
            if tensor.is_leaf:
                _accumulate(tensor, grad)
            else:
                key = id(tensor)
                pending[key] = grad if key not in pending else pending[key] + grad


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    grad = grad.astype(tensor.dtype, copy=False)
    tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
