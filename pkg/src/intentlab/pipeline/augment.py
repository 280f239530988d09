"""Training-set augmentation for both modalities.

Random draws are seeded from ``(seed, provenance)``, so an example always
receives the same perturbation regardless of processing order.
"""

from __future__ import annotations

import numpy as np

from ..errors import BadRange, NonPositiveSigma
from ..ingest import Activity, Modality
from .labels import Group, LabeledExample, Provenance

FRAME_OPS = ("horizontal_flip", "brightness", "contrast", "saturation", "hue", "gaussian_noise")
# inclusive bounds every configured range must sit inside
FRAME_OP_BOUNDS = {
    "horizontal_flip": (0.0, 1.0),  # probability
    "brightness": (-0.5, 0.5),  # additive delta
    "contrast": (0.0, 2.0),  # blend factor against the frame's gray mean
    "saturation": (0.0, 2.0),  # blend factor against per-pixel gray
    "hue": (-0.5, 0.5),  # rotation in turns of the YIQ chroma plane
    "gaussian_noise": (0.0, 0.5),  # noise std
}
DEFAULT_FRAME_AUGMENT = {
    "horizontal_flip": 0.5,
    "brightness": (-0.1, 0.1),
    "contrast": (0.8, 1.2),
    "saturation": (0.8, 1.2),
    "hue": (-0.05, 0.05),
    "gaussian_noise": (0.0, 0.02),
}

_GRAY = np.array([0.299, 0.587, 0.114])
_RGB2YIQ = np.array([[0.299, 0.587, 0.114],
                     [0.596, -0.274, -0.322],
                     [0.211, -0.523, 0.312]])
_YIQ2RGB = np.linalg.inv(_RGB2YIQ)


def provenance_seed(seed: int, prov: Provenance) -> list[int]:
    return [int(seed), list(Modality).index(prov.modality), int(prov.subject_id),
            Activity(prov.activity).index, int(prov.trial), list(Group).index(prov.group),
            int(prov.start), int(prov.copy)]


def augment_signal_gaussian(example: LabeledExample, sigma, seed: int = 0) -> LabeledExample:
    """Add i.i.d. zero-mean Gaussian noise; ``sigma`` is a scalar or per-channel vector."""
    sig = np.asarray(sigma, dtype=np.float64)
    if not np.all(sig > 0):
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    rng = np.random.default_rng(provenance_seed(seed, example.provenance))
    x = np.asarray(example.window, dtype=np.float64)
    noisy = x + rng.standard_normal(x.shape) * sig
    return example.with_window(noisy.astype(example.window.dtype))


def _check_range(name, spec):
    lo_b, hi_b = FRAME_OP_BOUNDS[name]
    if name == "horizontal_flip":
        lo = hi = float(spec)
    else:
        lo, hi = (float(spec), float(spec)) if np.isscalar(spec) else (float(spec[0]), float(spec[1]))
    if not (lo_b <= lo <= hi <= hi_b):
        raise BadRange(f"{name} range {spec} outside [{lo_b}, {hi_b}]")
    return lo, hi


def draw_frame_params(ops: dict, rng: np.random.Generator) -> dict:
    """One parameter draw per configured op, in the fixed FRAME_OPS order."""
    unknown = set(ops) - set(FRAME_OPS)
    if unknown:
        raise BadRange(f"unknown frame augmentations {sorted(unknown)}")
    params = {}
    for name in FRAME_OPS:
        if name not in ops:
            continue
        lo, hi = _check_range(name, ops[name])
        if name == "horizontal_flip":
            params[name] = bool(rng.random() < lo)
        else:
            params[name] = float(rng.uniform(lo, hi)) if hi > lo else lo
    return params


def apply_frame_params(clip: np.ndarray, params: dict, rng: np.random.Generator) -> np.ndarray:
    """Apply already-drawn parameters to every frame of ``[F, H, W, 3]``."""
    x = np.asarray(clip, dtype=np.float64)
    if params.get("horizontal_flip"):
        x = x[:, :, ::-1, :]
    if "brightness" in params:
        x = np.clip(x + params["brightness"], 0.0, 1.0)
    if "contrast" in params:
        f = params["contrast"]
        gray_mean = (x @ _GRAY).mean(axis=(1, 2))[:, None, None, None]
        x = np.clip(f * x + (1.0 - f) * gray_mean, 0.0, 1.0)
    if "saturation" in params:
        f = params["saturation"]
        gray = (x @ _GRAY)[..., None]
        x = np.clip(f * x + (1.0 - f) * gray, 0.0, 1.0)
    if "hue" in params:
        ang = 2.0 * np.pi * params["hue"]
        c, s = np.cos(ang), np.sin(ang)
        rot = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
        x = np.clip(x @ (_YIQ2RGB @ rot @ _RGB2YIQ).T, 0.0, 1.0)
    if params.get("gaussian_noise"):
        x = np.clip(x + rng.standard_normal(x.shape) * params["gaussian_noise"], 0.0, 1.0)
    return np.ascontiguousarray(x)


def augment_frames(example: LabeledExample, ops: dict | None = None, seed: int = 0,
                   copy: int | None = None) -> LabeledExample:
    """Clip-consistent colour/flip/noise augmentation, clamped to [0, 1].

    ``copy`` sets the provenance copy index of the result (and hence its seed).
    """
    if example.modality != Modality.FRAMES or np.ndim(example.window) != 4:
        raise BadRange("augment_frames needs a frame clip [F, H, W, C]")
    prov = example.provenance if copy is None else example.with_window(example.window, copy=copy).provenance
    rng = np.random.default_rng(provenance_seed(seed, prov))
    params = draw_frame_params(DEFAULT_FRAME_AUGMENT if ops is None else ops, rng)
    out = apply_frame_params(example.window, params, rng).astype(example.window.dtype)
    return LabeledExample(example.label, out, prov)
