"""Readers and writers for raw recordings.

Signal text files carry ``#`` header lines followed by whitespace-separated
numeric rows, one row per sample. Frame sequences are stored in a small
lossless container::

    b"FTNS" | u16 version=1 | u8 dtype=1 (f32) | u8 reserved=0 | u32 T, H, W, C
    payload: T*H*W*C little-endian f32, row-major (T outermost, C innermost)

Manifests are CSV-like lines ``path,subject,activity,trial,modality``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicatePath,
    EmptyRecording,
    IoFailure,
    MalformedRow,
    MissingFile,
    ParseError,
    RangeError,
    UnsupportedVersion,
)

SIGNAL_RATE_HZ = 500
VIDEO_FPS = 60
DEFAULT_CHANNELS = (0, 1, 2, 3)  # biceps, triceps, shoulder, forearm

FRAME_MAGIC = b"FTNS"
FRAME_VERSION = 1
DTYPE_F32 = 1
_FRAME_HEADER = struct.Struct("<4sHBB4I")


class Activity(str, Enum):
    LIFTING = "Lifting"
    CARRYING = "Carrying"
    HOLDING = "Holding"
    MOUNTING = "Mounting"

    @property
    def index(self) -> int:
        return list(Activity).index(self)

    @classmethod
    def parse(cls, text: str) -> "Activity":
        for a in cls:
            if a.value.lower() == text.strip().lower():
                return a
        raise ValueError(f"unknown activity {text!r}")


class Modality(str, Enum):
    SIGNAL = "signal"
    FRAMES = "frames"


@dataclass
class SignalRecording:
    subject_id: int
    activity: Activity
    trial: int
    rows: np.ndarray
    sample_rate_hz: int = SIGNAL_RATE_HZ

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float32)
        if self.rows.ndim != 2 or self.rows.shape[0] < 1:
            raise EmptyRecording("a recording needs at least one row of channel values")
        if not np.isfinite(self.rows).all():
            raise RangeError("recording contains non-finite values")
        if self.sample_rate_hz <= 0:
            raise RangeError("sample_rate_hz must be positive")

    @property
    def rate(self) -> int:
        return self.sample_rate_hz

    @property
    def data(self) -> np.ndarray:
        return self.rows

    @property
    def channels(self) -> int:
        return self.rows.shape[1]

    modality = Modality.SIGNAL


@dataclass
class FrameSequence:
    subject_id: int
    activity: Activity
    trial: int
    frames: np.ndarray
    fps: int = VIDEO_FPS
    scaled: bool = False

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 4 or self.frames.shape[0] < 1:
            raise DimensionMismatch(f"frames must be [T, H, W, C] with T >= 1, got {self.frames.shape}")
        if not np.isfinite(self.frames).all():
            raise RangeError("frames contain non-finite values")
        if self.scaled and (self.frames.min() < 0 or self.frames.max() > 1):
            raise RangeError("scaled frames must lie in [0, 1]")
        if self.fps <= 0:
            raise RangeError("fps must be positive")

    @property
    def rate(self) -> int:
        return self.fps

    @property
    def data(self) -> np.ndarray:
        return self.frames

    modality = Modality.FRAMES


def parse_signal_text(path, channel_columns=DEFAULT_CHANNELS, subject_id: int = 0,
                      activity: Activity = Activity.LIFTING, trial: int = 0,
                      sample_rate_hz: int = SIGNAL_RATE_HZ) -> SignalRecording:
    """Parse one exported signal file into a recording."""
    cols = list(channel_columns)
    if not cols or len(set(cols)) != len(cols) or min(cols) < 0:
        raise ValueError("channel_columns must be non-empty, distinct, non-negative indices")
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"{path} does not exist")
    need = max(cols) + 1
    rows = []
    width = None
    in_header = True
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            text = line.strip()
            if in_header and text.startswith("#"):
                continue
            in_header = False
            if not text:
                continue
            tokens = text.split()
            if len(tokens) < need:
                raise MalformedRow(path, line_no, f"expected at least {need} columns, found {len(tokens)}")
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise MalformedRow(path, line_no, f"expected {width} columns like earlier rows, found {len(tokens)}")
            try:
                rows.append([float(tokens[c]) for c in cols])
            except ValueError as exc:
                raise MalformedRow(path, line_no, f"non-numeric token ({exc})") from None
    if not rows:
        raise EmptyRecording(f"{path} has no data rows")
    return SignalRecording(subject_id, Activity(activity), trial, np.array(rows, dtype=np.float32),
                           sample_rate_hz)


def write_signal_text(rec: SignalRecording, path, header: dict | None = None) -> None:
    lines = [f"# {k}: {v}" for k, v in (header or {}).items()]
    lines.append("# EndOfHeader")
    lines.extend(" ".join(repr(float(v)) for v in row) for row in rec.rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def encode_frame_container(frames: np.ndarray) -> bytes:
    arr = np.asarray(frames)
    if arr.ndim != 4:
        raise DimensionMismatch(f"container payload must be 4-D, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise RangeError("refusing to write non-finite values")
    header = _FRAME_HEADER.pack(FRAME_MAGIC, FRAME_VERSION, DTYPE_F32, 0, *arr.shape)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def decode_frame_container(buf: bytes, source="<bytes>") -> np.ndarray:
    if len(buf) < _FRAME_HEADER.size or buf[:4] != FRAME_MAGIC:
        raise BadMagic(f"{source}: missing FTNS magic")
    _, version, dtype, _reserved, t, h, w, c = _FRAME_HEADER.unpack_from(buf)
    if version != FRAME_VERSION or dtype != DTYPE_F32:
        raise UnsupportedVersion(f"{source}: version {version}, dtype {dtype}")
    payload = buf[_FRAME_HEADER.size:]
    expected = t * h * w * c * 4
    if len(payload) != expected:
        raise DimensionMismatch(f"{source}: payload {len(payload)} bytes, header implies {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(t, h, w, c).astype(np.float32)


def write_frame_container(seq: FrameSequence, path) -> None:
    blob = encode_frame_container(seq.frames)
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_frame_container(path, subject_id: int = 0, activity: Activity = Activity.LIFTING,
                         trial: int = 0, fps: int = VIDEO_FPS) -> FrameSequence:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"{path} does not exist")
    frames = decode_frame_container(path.read_bytes(), path)
    return FrameSequence(subject_id, Activity(activity), trial, frames, fps)


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    subject_id: int
    activity: Activity
    trial: int
    modality: Modality


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path = Path(".")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def of(self, modality: Modality) -> list[ManifestEntry]:
        return [e for e in self.entries if e.modality == Modality(modality)]

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p


MANIFEST_FIELDS = ("path", "subject", "activity", "trial", "modality")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"{path} does not exist")
    entries = []
    seen = set()
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != len(MANIFEST_FIELDS):
            raise ParseError(line_no, "record", f"expected {len(MANIFEST_FIELDS)} fields, got {len(parts)}")
        if parts == list(MANIFEST_FIELDS):
            continue  # header row
        rel, subj, act, trial, mod = parts
        if not rel:
            raise ParseError(line_no, "path", "empty")
        try:
            subject_id = int(subj)
        except ValueError:
            raise ParseError(line_no, "subject", f"not an integer: {subj!r}") from None
        try:
            activity = Activity.parse(act)
        except ValueError as exc:
            raise ParseError(line_no, "activity", str(exc)) from None
        try:
            trial_no = int(trial)
        except ValueError:
            raise ParseError(line_no, "trial", f"not an integer: {trial!r}") from None
        try:
            modality = Modality(mod.lower())
        except ValueError:
            raise ParseError(line_no, "modality", f"must be signal|frames, got {mod!r}") from None
        if rel in seen:
            raise DuplicatePath(f"line {line_no}: duplicate path {rel}")
        seen.add(rel)
        entries.append(ManifestEntry(rel, subject_id, activity, trial_no, modality))
    return DatasetManifest(entries, path.parent)


def write_manifest(manifest: DatasetManifest, path) -> None:
    lines = ["# " + ",".join(MANIFEST_FIELDS)]
    for e in manifest.entries:
        lines.append(f"{e.path},{e.subject_id},{e.activity.value},{e.trial},{e.modality.value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_recording(manifest: DatasetManifest, entry: ManifestEntry,
                   channel_columns=DEFAULT_CHANNELS):
    path = manifest.resolve(entry)
    if entry.modality == Modality.SIGNAL:
        return parse_signal_text(path, channel_columns, entry.subject_id, entry.activity, entry.trial)
    return read_frame_container(path, entry.subject_id, entry.activity, entry.trial)
