"""Elementwise, shape, and reduction ops with their backward rules."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor, as_tensor, make_result


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return make_result("add", out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data
    return make_result("sub", out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def backward(g):
        ga = _unbroadcast(g * bd, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * ad, b.shape) if b.requires_grad else None
        return ga, gb

    return make_result("mul", ad * bd, (a, b), backward)


def matmul(a, b) -> Tensor:
    """Batched matrix product over the last two axes (both operands >= 2-D)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), a.shape) if a.requires_grad else None
        if b.requires_grad:
            if ad.ndim > 2 and bd.ndim == 2:
                # fold batch axes into one big product instead of summing a stack
                gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, b.shape)
        else:
            gb = None
        return ga, gb

    return make_result("matmul", ad @ bd, (a, b), backward)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    src = x.shape
    return make_result("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(src),))


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    inv = np.argsort(axes)
    return make_result("transpose", np.ascontiguousarray(x.data.transpose(axes)), (x,),
                       lambda g: (g.transpose(inv),))


def sum(x, axis=None, keepdims=False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    src = x.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, src).copy(),)

    return make_result("sum", np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    src = x.shape
    if axis is None:
        count = x.data.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = math.prod(src[a] for a in axes)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, src).copy(),)

    return make_result("mean", np.asarray(x.data.mean(axis=axis, keepdims=keepdims)), (x,), backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0
    return make_result("relu", np.where(pos, x.data, 0.0).astype(x.dtype), (x,), lambda g: (g * pos,))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x) -> Tensor:
    """GELU, tanh approximation."""
    x = as_tensor(x)
    xd = x.data
    x2 = xd * xd
    t = np.tanh(_GELU_C * xd * (1.0 + 0.044715 * x2))
    out = 0.5 * xd * (1.0 + t)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x2)
        return (g * (0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * dinner),)

    return make_result("gelu", out, (x,), backward)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return make_result("softmax", p, (x,), backward)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        gg = (g * xhat).sum(axis=lead) if gamma.requires_grad else None
        gb = g.sum(axis=lead) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gh = g * gamma.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                        - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return gx, gg, gb

    return make_result("layer_norm", out, (x, gamma, beta), backward)


def roll(x, shift, axes) -> Tensor:
    x = as_tensor(x)
    shift = tuple(shift)
    back = tuple(-s for s in shift)
    return make_result("roll", np.roll(x.data, shift, axis=axes), (x,),
                       lambda g: (np.roll(g, back, axis=axes),))


def concat(xs, axis: int = -1) -> Tensor:
    xs = [as_tensor(t) for t in xs]
    sizes = [t.shape[axis] for t in xs]
    cuts = np.cumsum(sizes)[:-1]
    return make_result("concat", np.concatenate([t.data for t in xs], axis=axis), xs,
                       lambda g: tuple(np.split(g, cuts, axis=axis)))


def square_sum(x) -> Tensor:
    x = as_tensor(x)
    xd = x.data
    return make_result("square_sum", np.asarray((xd * xd).sum()), (x,), lambda g: (2.0 * g * xd,))


def getitem(x, key) -> Tensor:
    """Basic (non-fancy) indexing."""
    x = as_tensor(x)

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[key] = g
        return (gx,)

    return make_result("getitem", np.ascontiguousarray(x.data[key]), (x,), backward)
