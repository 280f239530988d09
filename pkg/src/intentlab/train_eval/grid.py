"""Exhaustive search over the l2 rate and dropout rate."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Any, Callable

from ..errors import EmptyGrid
from .train import TrainConfig, build_and_train, evaluate_model

DEFAULT_GRID = {
    "l2": (0.0001, 0.05, 0.1),
    "dropout": (0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5),
}
# the published range written out as explicit values
PAPER_GRID = DEFAULT_GRID


@dataclass
class GridPoint:
    l2: float
    dropout: float
    val_acc: float
    result: Any = None


@dataclass
class GridResult:
    best: GridPoint
    points: list[GridPoint]

    def table(self) -> list[dict]:
        return [{"l2": p.l2, "dropout": p.dropout, "val_acc": p.val_acc} for p in self.points]


def select_best(points: list[GridPoint]) -> GridPoint:
    """Highest validation accuracy; ties go to the smaller l2, then the smaller dropout."""
    if not points:
        raise EmptyGrid("no grid points were evaluated")
    return min(points, key=lambda p: (-p.val_acc, p.l2, p.dropout))


def grid_search(train_fn: Callable[[float, float], tuple[float, Any]], grid: dict | None = None) -> GridResult:
    """Run ``train_fn(l2, dropout) -> (val_acc, result)`` at every grid point."""
    grid = DEFAULT_GRID if grid is None else grid
    l2s, drops = list(grid.get("l2", ())), list(grid.get("dropout", ()))
    if not l2s or not drops:
        raise EmptyGrid("grid needs at least one l2 value and one dropout value")
    points = []
    for l2, dr in itertools.product(l2s, drops):
        val_acc, result = train_fn(l2, dr)
        points.append(GridPoint(float(l2), float(dr), float(val_acc), result))
    return GridResult(select_best(points), points)


def model_train_fn(kind: str, model_cfg, data, tcfg: TrainConfig, progress=None):
    """Adapter that trains a fresh model per grid point on prepared data."""

    def run(l2: float, dropout: float):
        cfg = replace(tcfg, l2=l2, dropout=dropout)
        model, ckpt, stats = build_and_train(kind, model_cfg, data, cfg, progress)
        report = evaluate_model(model, data.x["val"], data.y["val"])
        return report.accuracy, (ckpt, stats)

    return run
