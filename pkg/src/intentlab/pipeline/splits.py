"""Stratified train/validation/test splitting and minority oversampling."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, EmptyClass
from .labels import Group, LabeledExample

SPLIT_NAMES = ("train", "val", "test")


@dataclass
class SplitAssignment:
    train: list[LabeledExample]
    val: list[LabeledExample]
    test: list[LabeledExample]
    ratios: tuple[float, float, float]

    def __getitem__(self, name: str) -> list[LabeledExample]:
        return {"train": self.train, "val": self.val, "validation": self.val, "test": self.test}[name]

    def items(self):
        return [(n, self[n]) for n in SPLIT_NAMES]


def allocate(n: int, ratios) -> list[int]:
    """Integer split of ``n`` items with every count within 1 of ``n * ratio``.

    Splits with a positive target get at least one item while items remain,
    so small strata still reach validation and test.
    """
    targets = [n * r for r in ratios]
    counts = [int(math.floor(t + 1e-9)) for t in targets]
    for i in sorted(range(len(ratios)), key=lambda i: -(targets[i] - counts[i])):
        if counts[i] == 0 and targets[i] > 0 and sum(counts) < n:
            counts[i] = 1
    while sum(counts) < n:
        i = max(range(len(ratios)), key=lambda i: (targets[i] - counts[i], -i))
        counts[i] += 1
    while sum(counts) > n:
        i = max(range(len(ratios)), key=lambda i: (counts[i] - targets[i], -i))
        counts[i] -= 1
    return counts


def _check_ratios(ratios) -> tuple[float, float, float]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"split ratios must be three positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)}")
    return ratios


def stratified_split(examples, ratios=(0.7, 0.15, 0.15), unit: str = "recording", seed: int = 0,
                     required_classes=None) -> SplitAssignment:
    """Split per (class, subject) stratum.

    ``unit="recording"`` keeps all windows of one (subject, activity, trial,
    group) segment together; ``unit="example"`` splits windows independently.
    The result depends only on the example set and ``seed``, not input order.
    """
    ratios = _check_ratios(ratios)
    if unit not in ("recording", "example"):
        raise ConfigError(f"unit must be recording|example, got {unit!r}")
    examples = sorted(examples, key=lambda e: e.provenance.key())
    if required_classes is not None:
        present = {e.label for e in examples}
        missing = [c.name for c in required_classes if c not in present]
        if missing:
            raise EmptyClass(f"no examples for classes {missing}")
    strata: dict[tuple, dict[tuple, list]] = defaultdict(lambda: defaultdict(list))
    for ex in examples:
        ukey = ex.provenance.recording_key() if unit == "recording" else ex.provenance.key()
        strata[(int(ex.label), ex.provenance.subject_id)][ukey].append(ex)
    rng = np.random.default_rng(seed)
    out = ([], [], [])
    for skey in sorted(strata):
        units = [strata[skey][k] for k in sorted(strata[skey])]
        order = rng.permutation(len(units))
        counts = allocate(len(units), ratios)
        pos = 0
        for split, c in enumerate(counts):
            for idx in order[pos:pos + c]:
                out[split].extend(units[idx])
            pos += c
    return SplitAssignment(out[0], out[1], out[2], ratios)


def oversample_minority(examples, factor: int = 3, target_groups=(Group.INTENTION,),
                        seed: int = 0) -> list[LabeledExample]:
    """Repeat each targeted example so it appears ``factor`` times in total.

    Duplicates share the window array and differ only in ``provenance.copy``.
    The output is sorted by provenance and then shuffled by ``seed``.
    """
    if factor < 1:
        raise ConfigError("oversampling factor must be >= 1")
    targets = {Group(g) for g in target_groups}
    out = []
    for ex in examples:
        out.append(ex)
        if ex.provenance.group in targets:
            out.extend(ex.with_window(ex.window, copy=ex.provenance.copy + k) for k in range(1, factor))
    out.sort(key=lambda e: e.provenance.key())
    perm = np.random.default_rng(seed).permutation(len(out))
    return [out[i] for i in perm]
