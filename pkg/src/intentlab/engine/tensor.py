"""Dense tensors and a reverse-mode tape.

Operations executed while a :class:`Tape` is active, with at least one input
that requires a gradient, are appended to the tape together with a closure
mapping the output gradient to input gradients. ``Tape.backward`` replays
that record in exact reverse order. Outside a tape, ops only compute values,
which is how inference runs.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import NonFiniteError, NotScalarLoss

_ACTIVE: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, dtype={self.dtype})"

    # operator sugar; the functions live in ops.py
    def __add__(self, other):
        from .ops import add
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import sub
        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub
        return sub(other, self)

    def __mul__(self, other):
        from .ops import mul
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from .ops import mul
        return mul(self, -1.0)

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)


class Param(Tensor):
    """A named model weight.

    Frozen params (``trainable=False``) never require a gradient, so the tape
    does not store one for them and the optimizer skips them.
    """

    __slots__ = ("trainable",)

    def __init__(self, data, name: str, trainable: bool = True):
        super().__init__(data, requires_grad=trainable, name=name)
        self.trainable = trainable

    def set_trainable(self, flag: bool) -> None:
        self.trainable = flag
        self.requires_grad = flag
        if not flag:
            self.grad = None

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        state = "" if self.trainable else ", frozen"
        return f"Param({self.name!r}, shape={self.shape}{state})"


class _Node:
    __slots__ = ("op", "out", "inputs", "backward")

    def __init__(self, op, out, inputs, backward):
        self.op = op
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered record of differentiable operations.

    Use as a context manager::

        with Tape() as tape:
            loss = model.loss(x, y)
        tape.backward(loss)
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)

    def record(self, op: str, out: Tensor, inputs: Sequence[Tensor], backward: Callable) -> None:
        self.nodes.append(_Node(op, out, tuple(inputs), backward))

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise NotScalarLoss(f"backward needs a scalar loss, got shape {loss.shape}")
        for node in self.nodes:
            node.out.grad = None
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            g = node.out.grad
            if g is None:
                continue
            grads = node.backward(g)
            for inp, gi in zip(node.inputs, grads):
                if gi is None or not inp.requires_grad:
                    continue
                if not np.isfinite(gi).all():
                    raise NonFiniteError(f"{node.op} (backward)")
                inp.grad = gi if inp.grad is None else inp.grad + gi
            # every consumer of node.out ran later, so its gradient is complete and spent
            if node.out is not loss:
                node.out.grad = None


def active_tape() -> Tape | None:
    return _ACTIVE[-1] if _ACTIVE else None


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def check_finite(op: str, arr: np.ndarray) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError(op)
    return arr


def make_result(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward: Callable) -> Tensor:
    """Wrap ``data`` as the output of ``op``, recording it when needed."""
    check_finite(op, data)
    tape = active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs)
    if needs:
        tape.record(op, out, inputs, backward)
    return out
