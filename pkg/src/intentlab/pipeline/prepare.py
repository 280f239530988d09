"""End-to-end preprocessing: recordings in, scaled labelled splits out."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..ingest import Modality
from .augment import DEFAULT_FRAME_AUGMENT, augment_frames, augment_signal_gaussian
from .labels import NUM_CLASSES, ClassLabel, Group, label_counts
from .scaling import apply_scaler, fit_scaler, scale_frames
from .splits import SplitAssignment, oversample_minority, stratified_split
from .store import PreparedData
from .windows import segment_windows, split_groups

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    intention_seconds: float = 1.0
    signal_window: int = 100
    frame_window: int = 32
    overlap: float = 0.5
    ratios: tuple = (0.7, 0.15, 0.15)
    split_unit: str = "recording"
    oversample_signal: int = 3
    oversample_frames: int = 1
    noise_sigma_fraction: float = 0.05
    augment_copies: int = 2
    frame_augment: dict = field(default_factory=lambda: dict(DEFAULT_FRAME_AUGMENT))
    frame_resolution: tuple = (224, 224)
    scaler_epsilon: float = 1e-8
    channel_columns: tuple = (0, 1, 2, 3)


def _windows(recordings, cfg: PipelineConfig, length: int):
    examples = []
    for rec in recordings:
        for seg in split_groups(rec, cfg.intention_seconds):
            examples.extend(segment_windows(seg, length, cfg.overlap))
    return examples


def _split_stats(assignment: SplitAssignment) -> dict:
    out = {}
    for name, exs in assignment.items():
        strata = Counter((ClassLabel(e.label).name, e.provenance.subject_id) for e in exs)
        out[name] = {
            "class_counts": label_counts(exs).tolist(),
            "strata": {f"{c}/subject{s}": n for (c, s), n in sorted(strata.items())},
        }
    return out


def prepare_signal(recordings, cfg: PipelineConfig, seed: int = 0) -> tuple[PreparedData, dict]:
    """Window, split, oversample, add noise, and standard-scale signal recordings."""
    examples = _windows(recordings, cfg, cfg.signal_window)
    split = stratified_split(examples, cfg.ratios, cfg.split_unit, seed, required_classes=list(ClassLabel))
    stats = {"windows_total": len(examples), "before_oversampling": _split_stats(split)}
    train = oversample_minority(split.train, cfg.oversample_signal, {Group.INTENTION}, seed)
    if cfg.noise_sigma_fraction > 0:
        sigma = cfg.noise_sigma_fraction * fit_scaler(train, cfg.scaler_epsilon).divisor
        train = [augment_signal_gaussian(e, sigma, seed) for e in train]
    scaler = fit_scaler(train, cfg.scaler_epsilon)
    scaled = SplitAssignment(
        [apply_scaler(scaler, e) for e in train],
        [apply_scaler(scaler, e) for e in split.val],
        [apply_scaler(scaler, e) for e in split.test],
        split.ratios,
    )
    stats["after_oversampling"] = _split_stats(scaled)
    stats["oversample_factor"] = cfg.oversample_signal
    meta = {"scaler": scaler.to_dict(), "num_classes": NUM_CLASSES}
    return PreparedData.from_assignment(scaled, Modality.SIGNAL, meta), stats


def prepare_frames(sequences, cfg: PipelineConfig, seed: int = 0) -> tuple[PreparedData, dict]:
    """Scale/resize, window, split and augment frame sequences.

    Pixel scaling is elementwise, so it is applied once per recording before
    windowing. Training clips get ``augment_copies`` augmented duplicates.
    """
    res = tuple(cfg.frame_resolution) if cfg.frame_resolution else None
    scaled_seqs = [s if s.scaled and res is None else scale_frames(s, res) for s in sequences]
    examples = _windows(scaled_seqs, cfg, cfg.frame_window)
    split = stratified_split(examples, cfg.ratios, cfg.split_unit, seed, required_classes=list(ClassLabel))
    stats = {"windows_total": len(examples), "before_oversampling": _split_stats(split)}
    train = oversample_minority(split.train, cfg.oversample_frames, {Group.INTENTION}, seed)
    augmented = []
    for e in train:
        for k in range(1, cfg.augment_copies + 1):
            augmented.append(augment_frames(e, cfg.frame_augment, seed, copy=e.provenance.copy + 100 * k))
    train = sorted(train + augmented, key=lambda e: e.provenance.key())
    perm = np.random.default_rng(seed).permutation(len(train))
    out = SplitAssignment([train[i] for i in perm], split.val, split.test, split.ratios)
    stats["after_oversampling"] = _split_stats(out)
    stats["oversample_factor"] = cfg.oversample_frames
    stats["augment_copies"] = cfg.augment_copies
    meta = {"num_classes": NUM_CLASSES, "frame_resolution": list(res) if res else None}
    return PreparedData.from_assignment(out, Modality.FRAMES, meta), stats

