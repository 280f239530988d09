"""Standard scaling, pixel scaling/resizing, and inverse-frequency class weights."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ChannelMismatch, EmptyInput, OutOfRange, ZeroCountClass
from .labels import LabeledExample


@dataclass
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray
    epsilon: float = 1e-8

    @property
    def constant(self) -> np.ndarray:
        return self.std < self.epsilon

    @property
    def divisor(self) -> np.ndarray:
        return np.where(self.constant, 1.0, self.std)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, d) -> "ScalerParams":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64),
                   float(d["epsilon"]))


def fit_scaler(train_examples, epsilon: float = 1e-8) -> ScalerParams:
    """Per-channel mean and population std over every row of every window."""
    windows = [np.asarray(e.window if isinstance(e, LabeledExample) else e, dtype=np.float64)
               for e in train_examples]
    if not windows:
        raise EmptyInput("cannot fit a scaler on an empty training set")
    rows = np.concatenate([w.reshape(-1, w.shape[-1]) for w in windows], axis=0)
    mean = rows.mean(axis=0)
    std = np.sqrt(((rows - mean) ** 2).mean(axis=0))
    return ScalerParams(mean, std, epsilon)


def apply_scaler(params: ScalerParams, example):
    """``(x - mean) / divisor`` per channel; accepts an example or a raw array."""
    x = example.window if isinstance(example, LabeledExample) else example
    x = np.asarray(x)
    if x.shape[-1] != params.mean.shape[0]:
        raise ChannelMismatch(f"scaler has {params.mean.shape[0]} channels, input has {x.shape[-1]}")
    out = ((x - params.mean) / params.divisor).astype(x.dtype if x.dtype.kind == "f" else np.float64)
    return example.with_window(out) if isinstance(example, LabeledExample) else out


def resize_bilinear(frames: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of ``[..., H, W, C]`` with half-pixel centres."""
    x = np.asarray(frames, dtype=np.float64)
    in_h, in_w = x.shape[-3], x.shape[-2]
    if (in_h, in_w) == (height, width):
        return x

    def axis_weights(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1)
        i0 = np.floor(src).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, src - i0

    h0, h1, fh = axis_weights(in_h, height)
    w0, w1, fw = axis_weights(in_w, width)
    fh = fh[:, None, None]
    rows = x[..., h0, :, :] * (1 - fh) + x[..., h1, :, :] * fh
    fw = fw[:, None]
    return rows[..., :, w0, :] * (1 - fw) + rows[..., :, w1, :] * fw


def scale_frames(example, resolution: tuple[int, int] | None = (224, 224)):
    """Map pixel values in [0, 255] to [0, 1] and resize to ``resolution``.

    Works on a :class:`LabeledExample` window or a ``FrameSequence``. A
    sequence already flagged ``scaled`` keeps its values and is only resized.
    """
    if isinstance(example, LabeledExample):
        x = example.window
    else:
        x = example.frames
    x = np.asarray(x, dtype=np.float64)
    if x.size and (x.min() < 0 or x.max() > 255):
        raise OutOfRange("pixel values must lie in [0, 255]")
    if not getattr(example, "scaled", False):
        x = x / 255.0
    if resolution is not None:
        x = np.clip(resize_bilinear(x, *resolution), 0.0, 1.0)
    x = x.astype(np.float32)
    if isinstance(example, LabeledExample):
        return example.with_window(x)
    return replace(example, frames=x, scaled=True)


def compute_class_weights(counts) -> np.ndarray:
    """Inverse-frequency weights ``total / (K * count_c)``."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size == 0 or np.any(counts < 1):
        raise ZeroCountClass(f"every class needs at least one example, got counts {counts.tolist()}")
    total = int(counts.sum())
    return total / (counts.size * counts.astype(np.float64))
