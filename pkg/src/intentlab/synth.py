"""Class-separable synthetic recordings laid out like the real study.

Signals: each activity drives one dominant channel with a two-tone carrier;
the first second is a low-amplitude ramp (intention), the rest full
amplitude. Frames: a coloured blob on a noisy background, moving up, right,
down, or pulsing in place depending on the activity. Each activity has its
own blob colour; during the first second the blob is faint and slow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadSpec
from .ingest import (
    Activity,
    DatasetManifest,
    FrameSequence,
    ManifestEntry,
    Modality,
    SignalRecording,
    write_frame_container,
    write_manifest,
    write_signal_text,
)

CARRIER_HZ = (31.0, 47.0, 67.0, 89.0)
# one colour per activity, a quarter turn apart in hue so mild hue jitter keeps them distinct
BLOB_COLORS = np.array([[0.95, 0.35, 0.30], [0.35, 0.90, 0.35], [0.30, 0.45, 0.95], [0.95, 0.90, 0.30]])


@dataclass
class SynthSpec:
    subjects: int = 3
    trials: int = 4
    signal_seconds: float = 4.0
    video_seconds: float = 2.0
    sample_rate: int = 500
    fps: int = 60
    channels: int = 4
    intention_seconds: float = 1.0
    intention_ramp: tuple = (0.1, 0.35)
    dominant_gain: float = 1.0
    background_gain: float = 0.3
    noise: float = 0.05
    subject_gain_spread: float = 0.15
    frame_size: tuple = (32, 32)
    frame_noise: float = 0.03
    blob_radius: float = 5.0
    intention_contrast: float = 0.4  # blob opacity during the intention second
    intention_speed: float = 0.04  # px/frame at 32 px resolution
    actual_speed: float = 0.25
    seed: int = 0
    signatures: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.subjects < 1 or self.trials < 1:
            raise BadSpec("subjects and trials must be >= 1")
        if self.sample_rate <= 0 or self.fps <= 0 or self.channels < len(Activity):
            raise BadSpec("rates must be positive and channels >= 4 (one dominant channel per activity)")
        if self.signal_seconds <= self.intention_seconds or self.video_seconds <= self.intention_seconds:
            raise BadSpec("recordings must last longer than the intention window")
        lo, hi = self.intention_ramp
        if not 0 < lo <= hi < self.dominant_gain * (1 - self.subject_gain_spread):
            raise BadSpec("intention amplitude must stay below the weakest actual amplitude")
        if not 0 <= self.subject_gain_spread < 1 or self.noise < 0 or self.frame_noise < 0:
            raise BadSpec("gain spread must lie in [0, 1) and noise levels must be >= 0")
        if not 0 < self.intention_contrast < 1:
            raise BadSpec("intention_contrast must lie in (0, 1)")
        if not 0 <= self.intention_speed < self.actual_speed:
            raise BadSpec("intention motion must be slower than actual motion")
        if not self.signatures:
            self.signatures = default_signatures(self.channels, self.dominant_gain, self.background_gain)
        sigs = [tuple(np.round(np.ravel(self.signatures[a.value]), 12)) for a in Activity]
        if len(set(sigs)) != len(sigs):
            raise BadSpec("activity signatures must be pairwise distinct")


def default_signatures(channels: int, dominant: float, background: float) -> dict:
    """Per-activity ``[channels, 2]`` table of (carrier Hz, amplitude)."""
    out = {}
    for a in Activity:
        sig = np.zeros((channels, 2))
        for c in range(channels):
            sig[c, 0] = CARRIER_HZ[(a.index + c) % len(CARRIER_HZ)] + 2.0 * a.index
            sig[c, 1] = dominant if c == a.index else background
        out[a.value] = sig
    return out


def subject_gains(spec: SynthSpec) -> np.ndarray:
    rng = np.random.default_rng([spec.seed, 7])
    return rng.uniform(1 - spec.subject_gain_spread, 1 + spec.subject_gain_spread, spec.subjects)


def _phases(spec: SynthSpec, activity: Activity) -> np.ndarray:
    return np.random.default_rng([spec.seed, 11, activity.index]).uniform(0, 2 * np.pi, (spec.channels, 2))


def synth_signal(spec: SynthSpec, subject: int, activity: Activity, trial: int) -> SignalRecording:
    n = int(round(spec.signal_seconds * spec.sample_rate))
    t = np.arange(n) / spec.sample_rate
    b = int(round(spec.intention_seconds * spec.sample_rate))
    env = 1.0 + 0.1 * np.sin(2 * np.pi * 0.5 * t)
    env[:b] = np.linspace(spec.intention_ramp[0], spec.intention_ramp[1], b)
    sig = np.asarray(spec.signatures[activity.value])
    ph = _phases(spec, activity)
    carrier = (np.sin(2 * np.pi * sig[:, 0][None] * t[:, None] + ph[:, 0])
               + 0.5 * np.sin(2 * np.pi * 2.3 * sig[:, 0][None] * t[:, None] + ph[:, 1]))
    gain = subject_gains(spec)[subject - 1]
    rows = gain * env[:, None] * sig[:, 1][None] * carrier
    if spec.noise:
        rng = np.random.default_rng([spec.seed, 1, subject, activity.index, trial])
        rows = rows + spec.noise * rng.standard_normal(rows.shape)
    return SignalRecording(subject, activity, trial, rows.astype(np.float32), spec.sample_rate)


def blob_track(spec: SynthSpec, activity: Activity, n_frames: int):
    """Blob centre (x, y) and radius per frame, in pixels."""
    h, w = spec.frame_size
    scale = w / 32.0
    b = int(round(spec.intention_seconds * spec.fps))
    k = np.arange(n_frames)
    travel = scale * (spec.intention_speed * np.minimum(k, b) + spec.actual_speed * np.maximum(k - b, 0))
    r = np.full(n_frames, spec.blob_radius * scale)
    x = np.full(n_frames, w / 2.0)
    y = np.full(n_frames, h / 2.0)
    if activity == Activity.LIFTING:
        y = 0.8 * h - travel
    elif activity == Activity.CARRYING:
        x = 0.2 * w + travel
    elif activity == Activity.MOUNTING:
        y = 0.2 * h + travel
    else:
        amp = np.where(k < b, 0.1, 0.45)
        r = r * (1.0 + amp * np.sin(2 * np.pi * k / 20.0))
    margin = spec.blob_radius * scale
    return np.clip(x, margin, w - margin), np.clip(y, margin, h - margin), r


def synth_frames(spec: SynthSpec, subject: int, activity: Activity, trial: int) -> FrameSequence:
    n = int(round(spec.video_seconds * spec.fps))
    h, w = spec.frame_size
    x, y, r = blob_track(spec, activity, n)
    gain = subject_gains(spec)[subject - 1]
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    d2 = (xx[None] - x[:, None, None]) ** 2 + (yy[None] - y[:, None, None]) ** 2
    b = int(round(spec.intention_seconds * spec.fps))
    opacity = np.where(np.arange(n) < b, spec.intention_contrast, 1.0)[:, None, None, None]
    alpha = opacity * np.exp(-d2 / (2 * (r[:, None, None] * gain) ** 2))[..., None]
    frames = 0.25 * (1 - alpha) + BLOB_COLORS[activity.index] * alpha
    if spec.frame_noise:
        rng = np.random.default_rng([spec.seed, 2, subject, activity.index, trial])
        frames = frames + spec.frame_noise * rng.standard_normal(frames.shape)
    return FrameSequence(subject, activity, trial, np.clip(frames, 0, 1).astype(np.float32),
                         spec.fps, scaled=True)


def _layout(spec: SynthSpec):
    for s in range(1, spec.subjects + 1):
        for a in Activity:
            for t in range(1, spec.trials + 1):
                yield s, a, t


def synth_signal_dataset(spec: SynthSpec) -> list[SignalRecording]:
    return [synth_signal(spec, s, a, t) for s, a, t in _layout(spec)]


def synth_frame_dataset(spec: SynthSpec) -> list[FrameSequence]:
    return [synth_frames(spec, s, a, t) for s, a, t in _layout(spec)]


def recording_stem(subject: int, activity: Activity, trial: int) -> str:
    return f"s{subject}_{activity.value.lower()}_t{trial}"


def write_synth_dataset(spec: SynthSpec, out_dir, modalities=(Modality.SIGNAL, Modality.FRAMES)) -> DatasetManifest:
    """Write signal text files and/or frame containers plus ``manifest.csv``.

    Frames are written as raw pixel intensities in [0, 255].
    """
    out = Path(out_dir)
    entries = []
    mods = [Modality(m) for m in modalities]
    if Modality.SIGNAL in mods:
        (out / "signals").mkdir(parents=True, exist_ok=True)
        for s, a, t in _layout(spec):
            rel = f"signals/{recording_stem(s, a, t)}.txt"
            write_signal_text(synth_signal(spec, s, a, t), out / rel,
                              {"subject": s, "activity": a.value, "trial": t,
                               "sampling_rate_hz": spec.sample_rate, "channels": spec.channels})
            entries.append(ManifestEntry(rel, s, a, t, Modality.SIGNAL))
    if Modality.FRAMES in mods:
        (out / "frames").mkdir(parents=True, exist_ok=True)
        for s, a, t in _layout(spec):
            rel = f"frames/{recording_stem(s, a, t)}.ftns"
            seq = synth_frames(spec, s, a, t)
            raw = FrameSequence(s, a, t, seq.frames * np.float32(255.0), spec.fps)
            write_frame_container(raw, out / rel)
            entries.append(ManifestEntry(rel, s, a, t, Modality.FRAMES))
    manifest = DatasetManifest(entries, out)
    write_manifest(manifest, out / "manifest.csv")
    return manifest
