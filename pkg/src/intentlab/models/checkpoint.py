"""Binary checkpoint format.

Layout (little-endian)::

    b"MILC"  u16 version
    u32 len  canonical JSON {"model", "config", "meta", "optimizer"}
    u32 count, then per tensor:
        u16 name_len, name, u8 rank, u32 dims[rank], f64 payload, u32 crc32(payload)
    u32 count, then per param: u16 name_len, name, u8 trainable
    u32 crc32 of every preceding byte

Tensor names are param names, ``buffer:<name>`` for layer state and
``adam.m:<name>`` / ``adam.v:<name>`` for optimizer moments.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..engine import AdamState
from ..errors import BadMagic, ConfigMismatch, CorruptPayload, VersionMismatch
from .base import Model, config_from_dict, config_to_dict
from .cnn_lstm import CnnLstm, CnnLstmConfig
from .swin import ToySwin, ToySwinConfig

MAGIC = b"MILC"
VERSION = 1
MODEL_KINDS = {"cnnlstm": (CnnLstm, CnnLstmConfig), "toyswin": (ToySwin, ToySwinConfig)}


@dataclass
class Checkpoint:
    kind: str
    config: Any
    params: dict[str, np.ndarray]
    freeze: dict[str, bool]
    buffers: dict[str, np.ndarray] = field(default_factory=dict)
    optimizer: AdamState | None = None
    meta: dict[str, Any] = field(default_factory=dict)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def make_checkpoint(model: Model, optimizer: AdamState | None = None, meta=None) -> Checkpoint:
    return Checkpoint(
        kind=model.kind,
        config=model.config,
        params={n: p.data.astype(np.float64).copy() for n, p in model.params.items()},
        freeze=model.freeze_flags(),
        buffers={k: np.asarray(v, dtype=np.float64).copy() for k, v in model.buffers().items()},
        optimizer=optimizer,
        meta={"seed": model.seed, **(meta or {})},
    )


def build_model(ckpt: Checkpoint) -> Model:
    cls, _ = MODEL_KINDS[ckpt.kind]
    model = cls(ckpt.config, seed=int(ckpt.meta.get("seed", 0)))
    load_into(model, ckpt)
    return model


def load_into(model: Model, ckpt: Checkpoint) -> None:
    """Copy checkpoint state into ``model``; kind and config must agree."""
    if model.kind != ckpt.kind:
        raise ConfigMismatch(f"checkpoint holds a {ckpt.kind} model, target is {model.kind}")
    if config_to_dict(model.config) != config_to_dict(ckpt.config):
        raise ConfigMismatch("checkpoint config differs from the target model config")
    if set(model.params) != set(ckpt.params):
        raise ConfigMismatch("checkpoint parameter names do not match the model")
    for n, p in model.params.items():
        if p.data.shape != ckpt.params[n].shape:
            raise ConfigMismatch(f"shape mismatch for {n}")
        p.data = ckpt.params[n].copy()
    model.apply_freeze_flags(ckpt.freeze)
    model.load_buffers({k: v.copy() for k, v in ckpt.buffers.items()})


def _pack_name(name: str) -> bytes:
    raw = name.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    header = {
        "model": ckpt.kind,
        "config": config_to_dict(ckpt.config),
        "meta": ckpt.meta,
        "optimizer": None,
    }
    tensors = dict(ckpt.params)
    tensors.update({f"buffer:{k}": v for k, v in ckpt.buffers.items()})
    if ckpt.optimizer is not None:
        opt = ckpt.optimizer
        header["optimizer"] = {"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2,
                               "eps": opt.eps, "t": opt.t}
        tensors.update({f"adam.m:{k}": v for k, v in sorted(opt.m.items())})
        tensors.update({f"adam.v:{k}": v for k, v in sorted(opt.v.items())})
    blob = bytearray(MAGIC + struct.pack("<H", VERSION))
    text = canonical_json(header).encode("utf-8")
    blob += struct.pack("<I", len(text)) + text
    blob += struct.pack("<I", len(tensors))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        payload = arr.tobytes()
        blob += _pack_name(name) + struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += payload + struct.pack("<I", zlib.crc32(payload))
    blob += struct.pack("<I", len(ckpt.freeze))
    for name, flag in ckpt.freeze.items():
        blob += _pack_name(name) + struct.pack("<B", int(flag))
    blob += struct.pack("<I", zlib.crc32(bytes(blob)))
    Path(path).write_bytes(bytes(blob))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptPayload("checkpoint truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def name(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")


def load_checkpoint(path) -> Checkpoint:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise BadMagic(f"{path}: not a checkpoint")
    if len(buf) < 10:
        raise CorruptPayload("checkpoint truncated")
    (version,) = struct.unpack("<H", buf[4:6])
    if version != VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {VERSION}")
    (crc,) = struct.unpack("<I", buf[-4:])
    if zlib.crc32(buf[:-4]) != crc:
        raise CorruptPayload("checkpoint checksum mismatch")
    r = _Reader(buf[:-4])
    r.pos = 6
    (hlen,) = r.unpack("<I")
    header = json.loads(r.take(hlen).decode("utf-8"))
    kind = header["model"]
    if kind not in MODEL_KINDS:
        raise ConfigMismatch(f"unknown model kind {kind!r}")
    config = config_from_dict(MODEL_KINDS[kind][1], header["config"])
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        name = r.name()
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I")
        payload = r.take(8 * int(np.prod(dims, dtype=np.int64)))
        (tcrc,) = r.unpack("<I")
        if zlib.crc32(payload) != tcrc:
            raise CorruptPayload(f"tensor {name} checksum mismatch")
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).astype(np.float64)
    (nflags,) = r.unpack("<I")
    freeze = {}
    for _ in range(nflags):
        name = r.name()
        (flag,) = r.unpack("<B")
        freeze[name] = bool(flag)
    if r.pos != len(r.buf):
        raise CorruptPayload("trailing bytes in checkpoint")
    params, buffers, m, v = {}, {}, {}, {}
    for name, arr in tensors.items():
        if name.startswith("buffer:"):
            buffers[name[7:]] = arr
        elif name.startswith("adam.m:"):
            m[name[7:]] = arr
        elif name.startswith("adam.v:"):
            v[name[7:]] = arr
        else:
            params[name] = arr
    opt = None
    if header.get("optimizer"):
        o = header["optimizer"]
        opt = AdamState(lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"], t=o["t"], m=m, v=v)
    return Checkpoint(kind=kind, config=config, params=params, freeze=freeze, buffers=buffers,
                      optimizer=opt, meta=header.get("meta", {}))
