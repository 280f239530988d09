"""Layer-level differentiable ops.

Shapes follow the channels-last convention: sequences are ``[B, L, C]``.
LSTM gate blocks are packed in the fixed order ``[i, f, g, o]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import (
    KernelTooLarge,
    LabelOutOfRange,
    NegativeRate,
    RateOutOfRange,
    ShapeMismatch,
    WindowTooLarge,
)
from . import ops
from .tensor import Tensor, as_tensor, make_result

GATE_ORDER = ("i", "f", "g", "o")


class CountingRNG:
    """``numpy.random.Generator`` wrapper that counts draws.

    Models hold one of these so tests can assert that eval mode never
    touches the random stream.
    """

    def __init__(self, seed):
        self.seed = seed
        self._gen = np.random.default_rng(seed)
        self.calls = 0

    def random(self, size):
        self.calls += 1
        return self._gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        self.calls += 1
        return self._gen.normal(loc, scale, size)

    def permutation(self, n):
        self.calls += 1
        return self._gen.permutation(n)


def _same_pad(k: int, stride: int, length: int) -> tuple[int, int]:
    out = -(-length // stride)
    total = max((out - 1) * stride + k - length, 0)
    return total // 2, total - total // 2


def conv1d(x, kernel, bias, stride: int = 1, padding: str = "valid") -> Tensor:
    """1-D convolution. ``kernel`` is ``[K, Cin, Cout]``.

    ``same`` pads with zeros symmetrically, the odd zero going on the right.
    """
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    if x.ndim != 3 or kernel.ndim != 3 or x.shape[2] != kernel.shape[1]:
        raise ShapeMismatch(f"conv1d input {x.shape} vs kernel {kernel.shape}")
    if bias.shape != (kernel.shape[2],):
        raise ShapeMismatch(f"conv1d bias {bias.shape} vs kernel {kernel.shape}")
    k, cin, cout = kernel.shape
    b, length, _ = x.shape
    if padding == "same":
        left, right = _same_pad(k, stride, length)
    elif padding == "valid":
        if length < k:
            raise KernelTooLarge(f"kernel {k} longer than input {length}")
        left = right = 0
    else:
        raise ShapeMismatch(f"unknown padding {padding!r}")
    xp = np.pad(x.data, ((0, 0), (left, right), (0, 0))) if (left or right) else x.data
    lp = xp.shape[1]
    lout = (lp - k) // stride + 1
    # [B, lout, Cin, K] -> [B, lout, K*Cin] with k outer
    win = sliding_window_view(xp, k, axis=1)[:, ::stride][:, :lout]
    cols = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(b, lout, k * cin)
    wmat = kernel.data.reshape(k * cin, cout)
    out = cols @ wmat + bias.data

    def backward(g):
        gk = gb = gx = None
        if kernel.requires_grad:
            gk = (cols.reshape(-1, k * cin).T @ g.reshape(-1, cout)).reshape(k, cin, cout)
        if bias.requires_grad:
            gb = g.sum(axis=(0, 1))
        if x.requires_grad:
            gcols = (g @ wmat.T).reshape(b, lout, k, cin)
            gxp = np.zeros_like(xp)
            span = stride * (lout - 1) + 1
            for j in range(k):
                gxp[:, j:j + span:stride] += gcols[:, :, j]
            gx = gxp[:, left:left + length]
        return gx, gk, gb

    return make_result("conv1d", out, (x, kernel, bias), backward)


@dataclass
class BatchNormState:
    """Running statistics for one batch-norm layer."""

    channels: int
    running_mean: np.ndarray = field(default=None)
    running_var: np.ndarray = field(default=None)
    initialized: bool = False

    def __post_init__(self):
        if self.running_mean is None:
            self.running_mean = np.zeros(self.channels)
        if self.running_var is None:
            self.running_var = np.ones(self.channels)


def batchnorm1d(x, gamma, beta, state: BatchNormState, mode: str = "train",
                momentum: float = 0.9, eps: float = 1e-3) -> Tensor:
    """Batch norm over the (batch, length) axes of ``[B, L, C]`` input.

    ``momentum`` weights the old running value:
    ``running = momentum * running + (1 - momentum) * batch``.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 3 or x.shape[2] != gamma.shape[0]:
        raise ShapeMismatch(f"batchnorm1d input {x.shape} vs {gamma.shape[0]} channels")
    xd = x.data
    if mode == "train":
        mu = xd.mean(axis=(0, 1))
        xc = xd - mu
        var = (xc * xc).mean(axis=(0, 1))
        if state.initialized:
            state.running_mean = momentum * state.running_mean + (1 - momentum) * mu
            state.running_var = momentum * state.running_var + (1 - momentum) * var
        else:
            state.running_mean = mu.astype(np.float64).copy()
            state.running_var = var.astype(np.float64).copy()
            state.initialized = True
    else:
        if not state.initialized:
            warnings.warn("batchnorm1d evaluated before any training step; using mean 0 / var 1",
                          RuntimeWarning, stacklevel=2)
        mu = state.running_mean.astype(xd.dtype)
        var = state.running_var.astype(xd.dtype)
        xc = xd - mu
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        gg = (g * xhat).sum(axis=(0, 1)) if gamma.requires_grad else None
        gb = g.sum(axis=(0, 1)) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gh = g * gamma.data
            if mode == "train":
                gx = inv * (gh - gh.mean(axis=(0, 1)) - xhat * (gh * xhat).mean(axis=(0, 1)))
            else:
                gx = gh * inv
        return gx, gg, gb

    return make_result("batchnorm1d", out, (x, gamma, beta), backward)


def maxpool1d(x, window: int, stride: int) -> Tensor:
    """Max pool along axis 1. Gradient goes to the first maximal index."""
    x = as_tensor(x)
    b, length, c = x.shape
    if window > length:
        raise WindowTooLarge(f"pool window {window} > length {length}")
    lout = (length - window) // stride + 1
    win = sliding_window_view(x.data, window, axis=1)[:, ::stride][:, :lout]  # [B, lout, C, w]
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gx = np.zeros_like(x.data)
        span = stride * (lout - 1) + 1
        for j in range(window):
            gx[:, j:j + span:stride] += g * (arg == j)
        return (gx,)

    return make_result("maxpool1d", np.ascontiguousarray(out), (x,), backward)


def dropout(x, rate: float, mode: str, rng: CountingRNG | int | None = None) -> Tensor:
    """Inverted dropout: survivors are scaled by ``1/(1-rate)`` in training."""
    if not 0.0 <= rate < 1.0:
        raise RateOutOfRange(f"dropout rate {rate} outside [0, 1)")
    x = as_tensor(x)
    if mode != "train" or rate == 0.0:
        return x
    if not isinstance(rng, CountingRNG):
        rng = CountingRNG(rng)
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return ops.mul(x, keep)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_layer(x, W, U, bias, return_sequences: bool = True) -> Tensor:
    """LSTM over ``[B, T, Din]`` with zero initial state.

    ``W`` is ``[Din, 4H]``, ``U`` is ``[H, 4H]``, ``bias`` is ``[4H]``, gate
    columns packed as i, f, g, o. Returns ``[B, T, H]`` or the last ``[B, H]``.
    """
    x, W, U, bias = as_tensor(x), as_tensor(W), as_tensor(U), as_tensor(bias)
    if x.ndim != 3 or W.shape[0] != x.shape[2] or W.shape[1] % 4:
        raise ShapeMismatch(f"lstm input {x.shape} vs W {W.shape}")
    hdim = W.shape[1] // 4
    if U.shape != (hdim, 4 * hdim) or bias.shape != (4 * hdim,):
        raise ShapeMismatch(f"lstm U {U.shape} / bias {bias.shape} for H={hdim}")
    b, steps, din = x.shape
    dt = x.dtype
    xw = x.data @ W.data + bias.data  # [B, T, 4H]
    Ud = U.data
    hs = np.zeros((b, steps + 1, hdim), dt)
    cs = np.zeros((b, steps + 1, hdim), dt)
    acts = np.empty((b, steps, 4 * hdim), dt)
    for t in range(steps):
        z = xw[:, t] + hs[:, t] @ Ud
        a = acts[:, t]
        a[:, :hdim] = _sigmoid(z[:, :hdim])
        a[:, hdim:2 * hdim] = _sigmoid(z[:, hdim:2 * hdim])
        a[:, 2 * hdim:3 * hdim] = np.tanh(z[:, 2 * hdim:3 * hdim])
        a[:, 3 * hdim:] = _sigmoid(z[:, 3 * hdim:])
        cs[:, t + 1] = a[:, hdim:2 * hdim] * cs[:, t] + a[:, :hdim] * a[:, 2 * hdim:3 * hdim]
        hs[:, t + 1] = a[:, 3 * hdim:] * np.tanh(cs[:, t + 1])
    out = hs[:, 1:].copy() if return_sequences else hs[:, -1].copy()

    def backward(g):
        if return_sequences:
            gh_seq = g
        else:
            gh_seq = np.zeros((b, steps, hdim), dt)
            gh_seq[:, -1] = g
        dz = np.empty((b, steps, 4 * hdim), dt)
        dh_next = np.zeros((b, hdim), dt)
        dc_next = np.zeros((b, hdim), dt)
        for t in range(steps - 1, -1, -1):
            a = acts[:, t]
            i, f, gg, o = (a[:, :hdim], a[:, hdim:2 * hdim], a[:, 2 * hdim:3 * hdim], a[:, 3 * hdim:])
            tc = np.tanh(cs[:, t + 1])
            dh = gh_seq[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            d = dz[:, t]
            d[:, :hdim] = dc * gg * i * (1.0 - i)
            d[:, hdim:2 * hdim] = dc * cs[:, t] * f * (1.0 - f)
            d[:, 2 * hdim:3 * hdim] = dc * i * (1.0 - gg * gg)
            d[:, 3 * hdim:] = dh * tc * o * (1.0 - o)
            dc_next = dc * f
            dh_next = d @ Ud.T
        dzf = dz.reshape(-1, 4 * hdim)
        gx = (dz @ W.data.T) if x.requires_grad else None
        gW = x.data.reshape(-1, din).T @ dzf if W.requires_grad else None
        gU = hs[:, :-1].reshape(-1, hdim).T @ dzf if U.requires_grad else None
        gb = dzf.sum(axis=0) if bias.requires_grad else None
        return gx, gW, gU, gb

    return make_result("lstm_layer", out, (x, W, U, bias), backward)


def dense(x, W, b, activation: str = "none") -> Tensor:
    """``act(x @ W + b)``; softmax subtracts the row max before exponentiating."""
    x, W = as_tensor(x), as_tensor(W)
    if x.shape[-1] != W.shape[0]:
        raise ShapeMismatch(f"dense input {x.shape} vs W {W.shape}")
    y = ops.add(ops.matmul(x, W), b)
    if activation == "none":
        return y
    if activation == "relu":
        return ops.relu(y)
    if activation == "softmax":
        return ops.softmax(y, axis=-1)
    raise ValueError(f"unknown activation {activation!r}")


PROB_FLOOR = 1e-12


def weighted_sce_loss(probs, labels, class_weights=None) -> Tensor:
    """Class-weighted mean sparse categorical cross-entropy on probabilities.

    ``sum_b w[y_b] * -log(p[b, y_b]) / sum_b w[y_b]``; with no weights every
    ``w`` is 1 and the result is the plain mean.
    """
    probs = as_tensor(probs)
    labels = np.asarray(labels, dtype=np.int64)
    bsz, k = probs.shape
    if labels.shape != (bsz,):
        raise ShapeMismatch(f"labels {labels.shape} for probs {probs.shape}")
    if bsz and (labels.min() < 0 or labels.max() >= k):
        raise LabelOutOfRange(f"labels must lie in [0, {k})")
    w = np.ones(k) if class_weights is None else np.asarray(class_weights, dtype=np.float64)
    if w.shape != (k,):
        raise ShapeMismatch(f"class_weights {w.shape} for {k} classes")
    rows = np.arange(bsz)
    p = probs.data[rows, labels]
    clamped = np.maximum(p, PROB_FLOOR)
    wy = w[labels]
    total = wy.sum()
    loss = (wy * -np.log(clamped)).sum() / total

    def backward(g):
        gp = np.zeros_like(probs.data)
        gp[rows, labels] = g * -(wy / total) / clamped * (p >= PROB_FLOOR)
        return (gp,)

    return make_result("weighted_sce_loss", np.asarray(loss, dtype=probs.dtype), (probs,), backward)


def l2_penalty(params, rate: float) -> Tensor:
    """``rate * sum(w**2)`` over ``params``; gradient ``2 * rate * w``."""
    if rate < 0:
        raise NegativeRate(f"l2 rate {rate} < 0")
    params = [as_tensor(p) for p in params]
    total = math.fsum(float((p.data * p.data).sum()) for p in params)

    def backward(g):
        return tuple(2.0 * rate * g * p.data for p in params)

    return make_result("l2_penalty", np.asarray(rate * total), params, backward)
