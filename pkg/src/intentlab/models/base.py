from __future__ import annotations

import copy
import dataclasses
from typing import Any

import numpy as np

from ..engine import CountingRNG, Param, Tensor
from ..errors import ConfigError


def config_to_dict(cfg) -> dict[str, Any]:
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def config_from_dict(cls, data: dict[str, Any]):
    """Build a config dataclass, rejecting unknown keys and restoring tuples."""
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for k, v in data.items():
        kwargs[k] = tuple(v) if isinstance(v, list) else v
    return cls(**kwargs)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def orthogonal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    a = rng.normal(size=(max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T


class Model:
    """Parameter container shared by both classifiers.

    Subclasses fill ``self.params`` (insertion order is the canonical order
    used by checkpoints) and implement ``forward``.
    """

    kind = "model"

    def __init__(self, config, seed: int = 0):
        self.config = config
        self.seed = seed
        self.params: dict[str, Param] = {}
        self.rng = CountingRNG(seed)

    def _add(self, name: str, value: np.ndarray) -> Param:
        p = Param(np.asarray(value, dtype=np.float64), name=name)
        self.params[name] = p
        return p

    def parameters(self) -> list[Param]:
        return list(self.params.values())

    def trainable(self) -> list[Param]:
        return [p for p in self.params.values() if p.trainable]

    def num_params(self, trainable_only: bool = False) -> int:
        ps = self.trainable() if trainable_only else self.parameters()
        return int(sum(p.data.size for p in ps))

    def regularized(self) -> list[Param]:
        raise NotImplementedError

    @property
    def l2_rate(self) -> float:
        raise NotImplementedError

    def forward(self, x, mode: str = "eval") -> Tensor:
        raise NotImplementedError

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def load_buffers(self, bufs: dict[str, np.ndarray]) -> None:
        if bufs:
            raise ConfigError(f"{self.kind} has no buffers, got {sorted(bufs)}")

    def reseed(self, seed: int) -> None:
        self.rng = CountingRNG(seed)

    def freeze_flags(self) -> dict[str, bool]:
        return {n: p.trainable for n, p in self.params.items()}

    def apply_freeze_flags(self, flags: dict[str, bool]) -> None:
        for n, flag in flags.items():
            self.params[n].set_trainable(flag)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode class probabilities, no tape."""
        return self.forward(Tensor(x), mode="eval").data

    def astype(self, dtype) -> "Model":
        """Independent copy whose params (and inputs it will see) use ``dtype``."""
        clone = copy.deepcopy(self)
        for p in clone.params.values():
            p.data = p.data.astype(dtype)
            p.grad = None
        return clone

    def snapshot(self) -> dict[str, np.ndarray]:
        snap = {n: p.data.copy() for n, p in self.params.items()}
        snap.update({f"buffer:{k}": v.copy() for k, v in self.buffers().items()})
        return snap

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        bufs = {}
        for k, v in snap.items():
            if k.startswith("buffer:"):
                bufs[k[len("buffer:"):]] = v.copy()
            else:
                self.params[k].data = v.copy()
        self.load_buffers(bufs)
