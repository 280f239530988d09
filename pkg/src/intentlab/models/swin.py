"""Toy-scale 3D shifted-window transformer for frame clips.

Tokens are kept as ``[B, T, H, W, D]``. Each stage runs pairs of blocks, the
second of every pair attending within windows displaced by half a window
(cyclic shift plus an additive mask). Stages are joined by 2x2 spatial patch
merging. Relative position bias is not modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import engine as E
from ..errors import ConfigError, HeadsDontDivide, NotDivisible, OddSpatialDims, ShapeMismatch
from .base import Model, glorot

MASK_NEG = -1e9
FREEZE_POLICIES = ("all_trainable", "paper_policy")


def partition_windows3d(tokens, window) -> E.Tensor:
    """``[B, T, H, W, D]`` -> ``[B*nW, wt*wh*ww, D]``, windows in (t, h, w) raster order."""
    tokens = E.as_tensor(tokens)
    b, t, h, w, d = tokens.shape
    wt, wh, ww = window
    if t % wt or h % wh or w % ww:
        raise NotDivisible(f"grid {(t, h, w)} not divisible by window {tuple(window)}")
    x = E.reshape(tokens, (b, t // wt, wt, h // wh, wh, w // ww, ww, d))
    x = E.transpose(x, (0, 1, 3, 5, 2, 4, 6, 7))
    return E.reshape(x, (-1, wt * wh * ww, d))


def reverse_windows3d(windows, window, dims) -> E.Tensor:
    """Inverse of :func:`partition_windows3d`; ``dims`` is ``(B, T, H, W)``."""
    b, t, h, w = dims
    wt, wh, ww = window
    d = windows.shape[-1]
    x = E.reshape(windows, (b, t // wt, h // wh, w // ww, wt, wh, ww, d))
    x = E.transpose(x, (0, 1, 4, 2, 5, 3, 6, 7))
    return E.reshape(x, (b, t, h, w, d))


def cyclic_shift3d(tokens, shift, inverse: bool = False) -> E.Tensor:
    """Roll the T, H, W axes by ``-shift`` (or ``+shift`` when undoing)."""
    sign = 1 if inverse else -1
    return E.roll(tokens, tuple(sign * s for s in shift), axes=(1, 2, 3))


def _axis_regions(n: int, w: int, s: int) -> np.ndarray:
    lab = np.zeros(n, dtype=np.int64)
    if s:
        lab[n - w:n - s] = 1
        lab[n - s:] = 2
    return lab


def build_shift_mask(dims, window, shift) -> np.ndarray:
    """Additive attention mask ``[nW, N, N]`` for shifted windows.

    Positions of the shifted grid are labelled by the contiguous region they
    came from; pairs with different labels get ``MASK_NEG``.
    """
    t, h, w = dims
    lt = _axis_regions(t, window[0], shift[0])
    lh = _axis_regions(h, window[1], shift[1])
    lw = _axis_regions(w, window[2], shift[2])
    labels = (lt[:, None, None] * 9 + lh[None, :, None] * 3 + lw[None, None, :]).astype(np.float64)
    win = partition_windows3d(labels[None, ..., None], window).data[..., 0]  # [nW, N]
    diff = win[:, :, None] != win[:, None, :]
    return np.where(diff, MASK_NEG, 0.0)


def wmsa3d(windows, qkv_w, qkv_b, proj_w, proj_b, heads: int, mask=None) -> E.Tensor:
    """Multi-head self-attention inside each window.

    ``windows`` is ``[nB, N, D]``. ``mask`` (``[nW, N, N]``) is added to the
    scores of window ``i`` as ``mask[i % nW]``.
    """
    windows = E.as_tensor(windows)
    nb, n, d = windows.shape
    if d % heads:
        raise HeadsDontDivide(f"dim {d} not divisible by {heads} heads")
    dh = d // heads
    qkv = E.dense(windows, qkv_w, qkv_b)
    qkv = E.transpose(E.reshape(qkv, (nb, n, 3, heads, dh)), (2, 0, 3, 1, 4))
    q = E.mul(E.getitem(qkv, 0), 1.0 / math.sqrt(dh))
    k = E.getitem(qkv, 1)
    v = E.getitem(qkv, 2)
    scores = E.matmul(q, E.transpose(k, (0, 1, 3, 2)))  # [nB, h, N, N]
    if mask is not None:
        mask = np.asarray(mask, dtype=scores.dtype)
        nw = mask.shape[0]
        scores = E.reshape(scores, (nb // nw, nw, heads, n, n))
        scores = E.add(scores, mask[None, :, None])
        scores = E.reshape(scores, (nb, heads, n, n))
    attn = E.softmax(scores, axis=-1)
    out = E.matmul(attn, v)  # [nB, h, N, dh]
    out = E.reshape(E.transpose(out, (0, 2, 1, 3)), (nb, n, d))
    return E.dense(out, proj_w, proj_b)


def patch_merge(tokens, reduce, norm=None) -> E.Tensor:
    """Concatenate each 2x2 spatial neighbourhood (4D), normalise, reduce to 2D.

    Concatenation order is (h, w) offsets (0,0), (1,0), (0,1), (1,1). ``norm``
    is an optional ``(gamma, beta)`` pair for layer norm over the 4D features.
    """
    tokens = E.as_tensor(tokens)
    b, t, h, w, d = tokens.shape
    if h % 2 or w % 2:
        raise OddSpatialDims(f"patch merge needs even H, W, got {(h, w)}")
    x = E.reshape(tokens, (b, t, h // 2, 2, w // 2, 2, d))
    x = E.transpose(x, (0, 1, 2, 4, 5, 3, 6))  # ..., w-offset, h-offset, d
    x = E.reshape(x, (b, t, h // 2, w // 2, 4 * d))
    if norm is not None:
        x = E.layer_norm(x, norm[0], norm[1])
    return E.matmul(x, reduce)


@dataclass
class ToySwinConfig:
    frames: int = 8
    height: int = 32
    width: int = 32
    channels: int = 3
    patch: tuple = (2, 4, 4)
    embed_dim: int = 32
    abs_pos_embed: bool = True  # learned per-token offset; without it pooling discards position
    depths: tuple = (2, 2)
    heads: tuple = (2, 4)
    window: tuple = (2, 4, 4)
    mlp_ratio: float = 4.0
    head_hidden: int = 64
    head_dropout: float = 0.5
    head_l2: float = 0.1
    num_classes: int = 8
    freeze_policy: str = "all_trainable"

    def __post_init__(self):
        if len(self.depths) != len(self.heads) or not self.depths:
            raise ConfigError("depths and heads must be non-empty and equally long")
        if self.freeze_policy not in FREEZE_POLICIES:
            raise ConfigError(f"freeze_policy must be one of {FREEZE_POLICIES}")
        if not 0 <= self.head_dropout < 1 or self.head_l2 < 0:
            raise ConfigError("head_dropout must lie in [0, 1) and head_l2 must be >= 0")
        pt, ph, pw = self.patch
        if self.frames % pt or self.height % ph or self.width % pw:
            raise ConfigError("input dims must be divisible by the patch size")
        for s, (grid, win, _) in enumerate(self.stage_geometry()):
            if any(g % wv for g, wv in zip(grid, win)):
                raise ConfigError(f"stage {s} grid {grid} not divisible by window {win}")
            if s < len(self.depths) - 1 and (grid[1] % 2 or grid[2] % 2):
                raise ConfigError(f"stage {s} grid {grid} cannot be patch-merged")
            dim = self.embed_dim * 2 ** s
            if dim % self.heads[s]:
                raise ConfigError(f"stage {s} dim {dim} not divisible by {self.heads[s]} heads")

    def stage_geometry(self):
        """Per stage: token grid, effective window, shift.

        A window never exceeds the grid; an axis the window fully covers is
        not shifted.
        """
        t = self.frames // self.patch[0]
        h = self.height // self.patch[1]
        w = self.width // self.patch[2]
        out = []
        for s in range(len(self.depths)):
            grid = (t, h, w)
            win = tuple(min(g, wv) for g, wv in zip(grid, self.window))
            shift = tuple(0 if g <= wv else wv // 2 for g, wv in zip(grid, self.window))
            out.append((grid, win, shift))
            h, w = h // 2, w // 2
        return out


class ToySwin(Model):
    kind = "toyswin"

    def __init__(self, config: ToySwinConfig | None = None, seed: int = 0):
        super().__init__(config or ToySwinConfig(), seed)
        cfg = self.config
        init = np.random.default_rng(seed)

        def tn(shape):
            return np.clip(init.normal(0.0, 0.02, size=shape), -0.04, 0.04)

        pdim = int(np.prod(cfg.patch)) * cfg.channels
        self._add("embed.W", tn((pdim, cfg.embed_dim)))
        self._add("embed.b", np.zeros(cfg.embed_dim))
        self._add("embed.norm.gamma", np.ones(cfg.embed_dim))
        self._add("embed.norm.beta", np.zeros(cfg.embed_dim))
        if cfg.abs_pos_embed:
            self._add("embed.pos", tn(cfg.stage_geometry()[0][0] + (cfg.embed_dim,)))
        self.masks = []
        for s, depth in enumerate(cfg.depths):
            dim = cfg.embed_dim * 2 ** s
            hidden = int(dim * cfg.mlp_ratio)
            grid, win, shift = cfg.stage_geometry()[s]
            self.masks.append(build_shift_mask(grid, win, shift) if any(shift) else None)
            for j in range(depth):
                pre = f"stages.{s}.blocks.{j}"
                self._add(f"{pre}.norm1.gamma", np.ones(dim))
                self._add(f"{pre}.norm1.beta", np.zeros(dim))
                self._add(f"{pre}.attn.qkv.W", tn((dim, 3 * dim)))
                self._add(f"{pre}.attn.qkv.b", np.zeros(3 * dim))
                self._add(f"{pre}.attn.proj.W", tn((dim, dim)))
                self._add(f"{pre}.attn.proj.b", np.zeros(dim))
                self._add(f"{pre}.norm2.gamma", np.ones(dim))
                self._add(f"{pre}.norm2.beta", np.zeros(dim))
                self._add(f"{pre}.mlp.fc1.W", tn((dim, hidden)))
                self._add(f"{pre}.mlp.fc1.b", np.zeros(hidden))
                self._add(f"{pre}.mlp.fc2.W", tn((hidden, dim)))
                self._add(f"{pre}.mlp.fc2.b", np.zeros(dim))
            if s < len(cfg.depths) - 1:
                self._add(f"stages.{s}.merge.norm.gamma", np.ones(4 * dim))
                self._add(f"stages.{s}.merge.norm.beta", np.zeros(4 * dim))
                self._add(f"stages.{s}.merge.reduce.W", tn((4 * dim, 2 * dim)))
        final = cfg.embed_dim * 2 ** (len(cfg.depths) - 1)
        self._add("norm.gamma", np.ones(final))
        self._add("norm.beta", np.zeros(final))
        out_in = final
        if cfg.head_hidden:
            self._add("head.hidden.W", glorot(init, final, cfg.head_hidden, (final, cfg.head_hidden)))
            self._add("head.hidden.b", np.zeros(cfg.head_hidden))
            out_in = cfg.head_hidden
        self._add("head.out.W", glorot(init, out_in, cfg.num_classes, (out_in, cfg.num_classes)))
        self._add("head.out.b", np.zeros(cfg.num_classes))
        self.apply_freeze_policy(cfg.freeze_policy)

    def paper_policy_trainable(self) -> list[str]:
        """Names left trainable by the transfer policy.

        Last stage's final block: attention projections and both layer norms
        (its MLP stays frozen). Plus the classification head.
        """
        cfg = self.config
        s = len(cfg.depths) - 1
        pre = f"stages.{s}.blocks.{cfg.depths[s] - 1}"
        names = [f"{pre}.{n}" for n in ("norm1.gamma", "norm1.beta", "attn.qkv.W", "attn.qkv.b",
                                          "attn.proj.W", "attn.proj.b", "norm2.gamma", "norm2.beta")]
        names += [n for n in self.params if n.startswith("head.")]
        return names

    def apply_freeze_policy(self, policy: str) -> None:
        if policy not in FREEZE_POLICIES:
            raise ConfigError(f"unknown freeze policy {policy!r}")
        keep = set(self.params) if policy == "all_trainable" else set(self.paper_policy_trainable())
        for n, p in self.params.items():
            p.set_trainable(n in keep)

    @property
    def l2_rate(self) -> float:
        return self.config.head_l2

    def regularized(self):
        return [self.params["head.out.W"]]

    def _block(self, x, s, j, win, shift, heads):
        p = self.params
        pre = f"stages.{s}.blocks.{j}"
        b, t, h, w, d = x.shape
        y = E.layer_norm(x, p[f"{pre}.norm1.gamma"], p[f"{pre}.norm1.beta"])
        shifted = j % 2 == 1 and any(shift)
        if shifted:
            y = cyclic_shift3d(y, shift)
        y = partition_windows3d(y, win)
        y = wmsa3d(y, p[f"{pre}.attn.qkv.W"], p[f"{pre}.attn.qkv.b"], p[f"{pre}.attn.proj.W"],
                   p[f"{pre}.attn.proj.b"], heads, self.masks[s] if shifted else None)
        y = reverse_windows3d(y, win, (b, t, h, w))
        if shifted:
            y = cyclic_shift3d(y, shift, inverse=True)
        x = E.add(x, y)
        y = E.layer_norm(x, p[f"{pre}.norm2.gamma"], p[f"{pre}.norm2.beta"])
        y = E.gelu(E.dense(y, p[f"{pre}.mlp.fc1.W"], p[f"{pre}.mlp.fc1.b"]))
        y = E.dense(y, p[f"{pre}.mlp.fc2.W"], p[f"{pre}.mlp.fc2.b"])
        return E.add(x, y)

    def embed(self, x) -> E.Tensor:
        cfg = self.config
        b = x.shape[0]
        pt, ph, pw = cfg.patch
        t, h, w = cfg.frames // pt, cfg.height // ph, cfg.width // pw
        y = E.reshape(x, (b, t, pt, h, ph, w, pw, cfg.channels))
        y = E.transpose(y, (0, 1, 3, 5, 2, 4, 6, 7))
        y = E.reshape(y, (b, t, h, w, pt * ph * pw * cfg.channels))
        p = self.params
        y = E.dense(y, p["embed.W"], p["embed.b"])
        y = E.layer_norm(y, p["embed.norm.gamma"], p["embed.norm.beta"])
        return E.add(y, p["embed.pos"]) if cfg.abs_pos_embed else y

    def forward(self, x, mode: str = "eval") -> E.Tensor:
        cfg = self.config
        x = E.as_tensor(x)
        want = (cfg.frames, cfg.height, cfg.width, cfg.channels)
        if x.ndim != 5 or x.shape[1:] != want:
            raise ShapeMismatch(f"expected [B, {', '.join(map(str, want))}], got {x.shape}")
        p = self.params
        h = self.embed(x)
        geometry = cfg.stage_geometry()
        for s, depth in enumerate(cfg.depths):
            _, win, shift = geometry[s]
            for j in range(depth):
                h = self._block(h, s, j, win, shift, cfg.heads[s])
            if s < len(cfg.depths) - 1:
                h = patch_merge(h, p[f"stages.{s}.merge.reduce.W"],
                                (p[f"stages.{s}.merge.norm.gamma"], p[f"stages.{s}.merge.norm.beta"]))
        h = E.layer_norm(h, p["norm.gamma"], p["norm.beta"])
        h = E.mean(h, axis=(1, 2, 3))
        if cfg.head_hidden:
            h = E.dense(h, p["head.hidden.W"], p["head.hidden.b"], "relu")
            h = E.dropout(h, cfg.head_dropout, mode, self.rng)
        return E.dense(h, p["head.out.W"], p["head.out.b"], "softmax")

    def astype(self, dtype):
        clone = super().astype(dtype)
        clone.masks = [None if m is None else m.astype(dtype) for m in clone.masks]
        return clone


def toy_swin_forward(cfg: ToySwinConfig, model: ToySwin, x, mode: str = "eval") -> E.Tensor:
    if model.config != cfg:
        raise ShapeMismatch("model was built with a different config")
    return model.forward(x, mode)
