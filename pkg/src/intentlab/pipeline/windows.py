"""Intention/actual segmentation and fixed-length windowing."""

from __future__ import annotations

import logging
import math

from ..errors import TooShort
from .labels import ClassLabel, Group, GroupSegment, LabeledExample, Provenance, RecordingId

log = logging.getLogger(__name__)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_groups(rec, intention_seconds: float = 1.0) -> tuple[GroupSegment, GroupSegment]:
    """Cut a recording at ``round(intention_seconds * rate)`` into intention and actual parts."""
    if intention_seconds <= 0:
        raise ValueError("intention_seconds must be positive")
    boundary = round_half_up(intention_seconds * rec.rate)
    n = rec.data.shape[0]
    if n <= boundary:
        raise TooShort(f"recording of {n} samples does not extend past the {boundary}-sample intention window")
    rid = RecordingId(rec.subject_id, rec.activity, rec.trial, rec.modality)
    return (GroupSegment(rid, Group.INTENTION, rec.data[:boundary]),
            GroupSegment(rid, Group.ACTUAL, rec.data[boundary:]))


def window_stride(length: int, overlap_fraction: float) -> int:
    return max(1, round_half_up(length * (1.0 - overlap_fraction)))


def window_starts(n: int, length: int, overlap_fraction: float) -> list[int]:
    if length < 1:
        raise ValueError("window length must be >= 1")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError("overlap_fraction must lie in [0, 1)")
    if n < length:
        return []
    return list(range(0, n - length + 1, window_stride(length, overlap_fraction)))


def segment_windows(seg: GroupSegment, length: int, overlap_fraction: float = 0.5) -> list[LabeledExample]:
    starts = window_starts(seg.data.shape[0], length, overlap_fraction)
    if not starts:
        log.warning("segment %s/%s has %d samples, shorter than window %d",
                    seg.source, seg.group.value, seg.data.shape[0], length)
    src = seg.source
    label = ClassLabel.of(src.activity, seg.group)
    return [
        LabeledExample(label, seg.data[s:s + length],
                       Provenance(src.subject_id, src.activity, src.trial, seg.group, s, 0, src.modality))
        for s in starts
    ]
