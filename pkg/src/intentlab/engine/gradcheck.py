"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor


def numeric_grad(fn: Callable[[], Tensor], target: Tensor, h: float = 1e-5,
                 indices=None) -> np.ndarray:
    """Central differences of scalar ``fn()`` w.r.t. ``target.data``.

    Only ``indices`` (flat) are probed when given; other entries stay NaN.
    """
    flat = target.data.reshape(-1)
    out = np.full(flat.shape, np.nan)
    probe = range(flat.size) if indices is None else indices
    for i in probe:
        orig = flat[i]
        flat[i] = orig + h
        fp = float(fn().data)
        flat[i] = orig - h
        fm = float(fn().data)
        flat[i] = orig
        out[i] = (fp - fm) / (2 * h)
    return out.reshape(target.shape)


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Largest ``|a-n| / (|a|+|n|)`` over probed entries whose magnitude exceeds ``floor``."""
    a = analytic.reshape(-1)
    n = numeric.reshape(-1)
    keep = ~np.isnan(n) & ((np.abs(a) + np.abs(n)) >= floor)
    if not keep.any():
        return 0.0
    return float(np.max(np.abs(a[keep] - n[keep]) / (np.abs(a[keep]) + np.abs(n[keep]))))


def check_gradients(fn: Callable[[], Tensor], wrt: Sequence[Tensor], h: float = 1e-5,
                    max_probes: int | None = None, rng=None) -> dict[str, float]:
    """Compare tape gradients of ``fn`` with central differences.

    Returns the max relative error per tensor (keyed by name or position).
    ``max_probes`` caps the number of entries probed per tensor.
    """
    for t in wrt:
        t.grad = None
    with Tape() as tape:
        loss = fn()
    tape.backward(loss)
    rng = np.random.default_rng(0) if rng is None else rng
    report = {}
    for pos, t in enumerate(wrt):
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        idx = None
        if max_probes is not None and t.data.size > max_probes:
            idx = rng.choice(t.data.size, size=max_probes, replace=False)
        numeric = numeric_grad(fn, t, h, idx)
        report[t.name or str(pos)] = max_relative_error(analytic, numeric)
    return report
