"""Dense float64 tensors with reverse-mode differentiation and SGD.

Shapes are always explicit: there is no broadcasting, and mismatches raise
DimensionError instead of silently aligning. Gradients accumulate across
backward calls until zero_grad, which is what shared-encoder multi-task
training relies on.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    ContractError,
    DimensionError,
    DomainError,
    InputError,
    StateError,
)

_tls = threading.local()


def _tape_stack() -> list["Tape"]:
    stack = getattr(_tls, "stack", None)
    if stack is None:
        stack = _tls.stack = []
    return stack


def active_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of executed operations for one training run.

    Operations executed while the tape is active are appended in execution
    order, which is topological by construction, so a single reverse sweep
    visits every recorded operation exactly once.
    """

    def __init__(self) -> None:
        self.ops: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> bool:
        _tape_stack().pop()
        return False

    def __len__(self) -> int:
        return len(self.ops)


class Tensor:
    """Dense 64-bit float array with a same-shape gradient buffer."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward", "_tape")

    def __init__(self, values, requires_grad: bool = False) -> None:
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.values)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ContractError(f"item() needs a single-entry tensor, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def copy_values(self) -> np.ndarray:
        return self.values.copy()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar delegating to the module-level ops.
    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return subtract(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return hadamard(self, other)

    def sum(self) -> "Tensor":
        return total(self)


def record(values: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    """Create an op output, recording it when an active tape needs gradients.

    `backward(g)` must return one gradient contribution per parent (or None
    for parents that take no gradient).
    """
    out = Tensor(values)
    tape = active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out._tape = tape
        tape.ops.append(out)
    return out


def backward(loss: Tensor) -> None:
    """Reverse sweep from a scalar loss over the tape that recorded it.

    Gradients are added into `.grad` buffers, so calling backward on several
    losses sums their contributions until zero_grad.
    """
    if loss.shape != ():
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = loss._tape
    if tape is None:
        raise StateError("loss was not recorded on an active tape")
    adjoint: dict[int, np.ndarray] = {id(loss): np.ones(())}
    for node in reversed(tape.ops):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        node.grad = node.grad + g
        contributions = node._backward(g)
        for parent, contrib in zip(node._parents, contributions):
            if contrib is None or not parent.requires_grad:
                continue
            if parent._tape is tape and parent._backward is not None:
                key = id(parent)
                if key in adjoint:
                    adjoint[key] = adjoint[key] + contrib
                else:
                    adjoint[key] = contrib
            else:
                parent.grad += contrib


def zero_grads(params: Sequence[Tensor]) -> None:
    for p in params:
        p.zero_grad()


def sgd_step(params: Sequence[Tensor], learning_rate: float) -> None:
    """Plain gradient-descent update: p <- p - lr * grad(p)."""
    if not np.isfinite(learning_rate) or learning_rate <= 0.0:
        raise ConfigError(f"learning rate must be a positive finite number, got {learning_rate}")
    for p in params:
        if p.requires_grad:
            p.values -= learning_rate * p.grad


# ---------------------------------------------------------------------------
# Elementary operations
# ---------------------------------------------------------------------------


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op} needs matching shapes, got {a.shape} and {b.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; also accepts a 1-D right operand as a column vector."""
    if a.values.ndim != 2 or b.values.ndim not in (1, 2):
        raise DimensionError(
            f"matmul needs a 2-D left operand and 1-D or 2-D right operand, "
            f"got {a.shape} and {b.shape}"
        )
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions disagree: {a.shape} vs {b.shape}")
    av, bv = a.values, b.values

    def back(g):
        if bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g @ bv.T, av.T @ g

    return record(av @ bv, (a, b), back)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")
    return record(a.values + b.values, (a, b), lambda g: (g, g))


def subtract(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "subtract")
    return record(a.values - b.values, (a, b), lambda g: (g, -g))


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "hadamard")
    av, bv = a.values, b.values
    return record(av * bv, (a, b), lambda g: (g * bv, g * av))


_BINARY = {"add": add, "subtract": subtract, "hadamard": hadamard}


def elementwise_binary(a: Tensor, b: Tensor, kind: str) -> Tensor:
    try:
        return _BINARY[kind](a, b)
    except KeyError:
        raise ConfigError(f"unknown binary kind {kind!r}; expected one of {sorted(_BINARY)}")


def sigmoid(x: Tensor) -> Tensor:
    v = x.values
    s = np.empty_like(v)
    pos = v >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    s[~pos] = ev / (1.0 + ev)
    return record(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.values)
    return record(t, (x,), lambda g: (g * (1.0 - t * t),))


def relu(x: Tensor) -> Tensor:
    v = x.values
    return record(np.maximum(v, 0.0), (x,), lambda g: (g * (v > 0.0),))


def ln(x: Tensor) -> Tensor:
    v = x.values
    if np.any(v <= 0.0):
        idx = tuple(int(i) for i in np.argwhere(v <= 0.0)[0])
        raise DomainError(f"ln needs strictly positive entries; entry {idx} is {v[idx]}")
    return record(np.log(v), (x,), lambda g: (g / v,))


_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu, "ln": ln}


def elementwise_unary(x: Tensor, kind: str) -> Tensor:
    try:
        return _UNARY[kind](x)
    except KeyError:
        raise ConfigError(f"unknown unary kind {kind!r}; expected one of {sorted(_UNARY)}")


def softmax(x: Tensor) -> Tensor:
    """Stable softmax of a 1-D tensor (max-subtraction before exp)."""
    if x.values.ndim != 1 or x.values.size < 1:
        raise DimensionError(f"softmax needs a non-empty 1-D tensor, got shape {x.shape}")
    e = np.exp(x.values - x.values.max())
    y = e / e.sum()
    return record(y, (x,), lambda g: (y * (g - np.dot(g, y)),))


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    if not parts:
        raise InputError("concat needs at least one part")
    ndim = parts[0].values.ndim
    if not 0 <= axis < ndim:
        raise DimensionError(f"concat axis {axis} out of range for {ndim}-D parts")
    ref = list(parts[0].shape)
    for i, p in enumerate(parts[1:], start=1):
        cand = list(p.shape)
        if len(cand) != ndim or any(c != r for d, (c, r) in enumerate(zip(cand, ref)) if d != axis):
            raise DimensionError(
                f"concat part {i} has shape {p.shape}, incompatible with part 0 shape "
                f"{parts[0].shape} along non-concat dimensions"
            )
    sizes = [p.shape[axis] for p in parts]
    cuts = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, cuts, axis=axis))

    return record(np.concatenate([p.values for p in parts], axis=axis), parts, back)


def total(x: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    return record(np.asarray(x.values.sum()), (x,), lambda g: (np.full_like(x.values, float(g)),))


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply by a plain float constant (the constant takes no gradient)."""
    f = float(factor)
    return record(x.values * f, (x,), lambda g: (g * f,))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != x.values.size:
        raise DimensionError(f"cannot reshape {x.shape} into {shape}")
    return record(x.values.reshape(shape), (x,), lambda g: (g.reshape(x.values.shape),))


def take_rows(x: Tensor, indices: Sequence[int]) -> Tensor:
    """Gather rows of a 2-D tensor; backward scatter-adds into the source."""
    if x.values.ndim != 2:
        raise DimensionError(f"take_rows needs a 2-D tensor, got shape {x.shape}")
    idx = np.asarray(list(indices), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        bad = idx[(idx < 0) | (idx >= x.shape[0])][0]
        raise InputError(f"row index {bad} out of range for {x.shape[0]} rows")

    def back(g):
        gx = np.zeros_like(x.values)
        np.add.at(gx, idx, g)
        return (gx,)

    return record(x.values[idx], (x,), back)


def row(x: Tensor, i: int) -> Tensor:
    """Single row of a 2-D tensor as a 1-D vector."""
    if x.values.ndim != 2:
        raise DimensionError(f"row needs a 2-D tensor, got shape {x.shape}")
    if not 0 <= i < x.shape[0]:
        raise InputError(f"row index {i} out of range for {x.shape[0]} rows")

    def back(g):
        gx = np.zeros_like(x.values)
        gx[i] = g
        return (gx,)

    return record(x.values[i].copy(), (x,), back)


def custom_op(values, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    """Register a composite operation with a hand-written backward."""
    return record(np.asarray(values, dtype=np.float64), parents, backward_fn)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape))


def ones(shape) -> Tensor:
    return Tensor(np.ones(shape))
