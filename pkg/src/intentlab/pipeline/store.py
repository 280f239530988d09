"""On-disk layout of a prepared dataset.

``<dir>/<split>.ftns`` holds every window of the split stacked along the
first container axis (signal windows as ``[N*L, C, 1, 1]``, frame clips as
``[N*F, H, W, C]``), ``<dir>/<split>.labels`` the u8 class ids, and
``index.csv`` one provenance row per example. ``meta.json`` records the
window geometry and scaler.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError, DimensionMismatch, MissingFile
from ..ingest import Activity, Modality, decode_frame_container, encode_frame_container
from .labels import ClassLabel, Group, Provenance
from .splits import SPLIT_NAMES

INDEX_FIELDS = ("split", "position", "label", "subject", "activity", "trial", "group", "start", "copy")


@dataclass
class PreparedData:
    modality: Modality
    x: dict[str, np.ndarray]
    y: dict[str, np.ndarray]
    provenance: dict[str, list[Provenance]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_assignment(cls, assignment, modality, meta=None) -> "PreparedData":
        x, y, prov = {}, {}, {}
        for name, exs in assignment.items():
            if exs:
                x[name] = np.stack([np.asarray(e.window, dtype=np.float32) for e in exs])
            else:
                x[name] = np.zeros((0,), dtype=np.float32)
            y[name] = np.array([int(e.label) for e in exs], dtype=np.int64)
            prov[name] = [e.provenance for e in exs]
        return cls(Modality(modality), x, y, prov, dict(meta or {}))

    def window_shape(self) -> tuple:
        for name in SPLIT_NAMES:
            if self.x[name].ndim > 1:
                return self.x[name].shape[1:]
        raise DataError("prepared dataset has no examples")


def save_prepared(data: PreparedData, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shape = data.window_shape()
    rows = []
    for name in SPLIT_NAMES:
        x, y = data.x[name], data.y[name]
        n = y.shape[0]
        if data.modality == Modality.SIGNAL:
            stacked = x.reshape(n * shape[0], shape[1], 1, 1) if n else np.zeros((0, shape[1], 1, 1))
        else:
            stacked = x.reshape((n * shape[0],) + tuple(shape[1:])) if n else np.zeros((0,) + tuple(shape[1:]))
        (out / f"{name}.ftns").write_bytes(encode_frame_container(stacked))
        (out / f"{name}.labels").write_bytes(y.astype(np.uint8).tobytes())
        for i, p in enumerate(data.provenance.get(name, [])):
            rows.append([name, i, int(y[i]), p.subject_id, p.activity.value, p.trial, p.group.value,
                         p.start, p.copy])
    with (out / "index.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(INDEX_FIELDS)
        w.writerows(rows)
    meta = dict(data.meta)
    meta.update({"modality": data.modality.value, "window_shape": list(shape),
                 "counts": {n: int(data.y[n].shape[0]) for n in SPLIT_NAMES}})
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_prepared(in_dir) -> PreparedData:
    src = Path(in_dir)
    if not (src / "meta.json").is_file():
        raise MissingFile(f"{src} is not a prepared dataset (meta.json missing)")
    meta = json.loads((src / "meta.json").read_text())
    modality = Modality(meta["modality"])
    shape = tuple(meta["window_shape"])
    x, y = {}, {}
    for name in SPLIT_NAMES:
        labels = np.frombuffer((src / f"{name}.labels").read_bytes(), dtype=np.uint8).astype(np.int64)
        stacked = decode_frame_container((src / f"{name}.ftns").read_bytes(), src / f"{name}.ftns")
        n = labels.shape[0]
        if stacked.shape[0] != n * shape[0]:
            raise DimensionMismatch(f"{name}: {stacked.shape[0]} rows for {n} windows of {shape[0]}")
        x[name] = stacked.reshape((n,) + shape)
        y[name] = labels
    prov = {n: [] for n in SPLIT_NAMES}
    index = src / "index.csv"
    if index.is_file():
        with index.open(newline="") as fh:
            for row in csv.DictReader(fh):
                prov[row["split"]].append(Provenance(
                    int(row["subject"]), Activity(row["activity"]), int(row["trial"]),
                    Group(row["group"]), int(row["start"]), int(row["copy"]), modality))
    return PreparedData(modality, x, y, prov, meta)


def class_names() -> list[str]:
    return [c.name for c in ClassLabel]
