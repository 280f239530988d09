"""Mini-batch training with class weighting and best-validation selection."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .. import engine as E
from ..errors import ConfigError, DivergedLoss, EmptySplit, NonFiniteError
from ..models import Checkpoint, Model, build_model, create_model, make_checkpoint
from ..pipeline import NUM_CLASSES, PreparedData, compute_class_weights
from .metrics import MetricsReport, metrics_from_predictions

log = logging.getLogger(__name__)

EVAL_BATCH = 256


@dataclass
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 128
    lr: float = 0.001
    l2: float | None = None  # None keeps the model config's rate
    dropout: float | None = None
    class_weights: bool = True
    seed: int = 0
    selection: str = "best_val_acc"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")
        if self.selection not in ("best_val_acc", "last"):
            raise ConfigError("selection must be best_val_acc|last")

    @classmethod
    def for_model(cls, kind: str, **overrides) -> "TrainConfig":
        base = {"cnnlstm": dict(epochs=1000, batch_size=128), "toyswin": dict(epochs=100, batch_size=32)}[kind]
        base.update(overrides)
        return cls(**base)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


EPOCH_FIELDS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


def epochs_to_csv(stats) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EPOCH_FIELDS)
    for s in stats:
        w.writerow([s.epoch, repr(s.train_loss), repr(s.train_acc), repr(s.val_loss), repr(s.val_acc)])
    return buf.getvalue()


def apply_overrides(kind: str, model_cfg, tcfg: TrainConfig):
    """Model config with the train config's l2/dropout overrides folded in."""
    changes = {}
    if tcfg.l2 is not None:
        changes["l2" if kind == "cnnlstm" else "head_l2"] = tcfg.l2
    if tcfg.dropout is not None:
        changes["dropout" if kind == "cnnlstm" else "head_dropout"] = tcfg.dropout
    return replace(model_cfg, **changes) if changes else model_cfg


def predict_proba(model: Model, x: np.ndarray, batch_size: int = EVAL_BATCH) -> np.ndarray:
    dtype = model.params[next(iter(model.params))].data.dtype
    out = [model.predict(np.asarray(x[i:i + batch_size], dtype=dtype)) for i in range(0, len(x), batch_size)]
    return np.concatenate(out, axis=0) if out else np.zeros((0, NUM_CLASSES))


def evaluate_model(model: Model, x: np.ndarray, y: np.ndarray, num_classes: int = NUM_CLASSES) -> MetricsReport:
    if len(y) == 0:
        raise EmptySplit("cannot evaluate on an empty split")
    probs = predict_proba(model, x)
    return metrics_from_predictions(y, probs.argmax(axis=1), num_classes)


def evaluate(ckpt: Checkpoint, x: np.ndarray, y: np.ndarray) -> MetricsReport:
    """Score a checkpoint by argmax prediction on one split."""
    return evaluate_model(build_model(ckpt), x, y)


def _mean_ce(probs: np.ndarray, y: np.ndarray) -> float:
    p = np.maximum(probs[np.arange(len(y)), y], E.nn.PROB_FLOOR)
    return float(np.mean(-np.log(p)))


def train(model: Model, data: PreparedData, cfg: TrainConfig, progress=None) -> tuple[Checkpoint, list[EpochStats]]:
    """Train ``model`` in place and return the selected checkpoint plus per-epoch stats.

    The selected epoch is the one with the highest validation accuracy (the
    latest on ties); the model is left holding those weights.
    """
    xtr, ytr = data.x["train"], data.y["train"]
    xva, yva = data.x["val"], data.y["val"]
    if len(ytr) == 0 or len(yva) == 0:
        raise EmptySplit("training needs non-empty train and validation splits")
    weights = None
    if cfg.class_weights:
        weights = compute_class_weights(np.bincount(ytr, minlength=NUM_CLASSES))
    rng = np.random.default_rng(cfg.seed)
    model.reseed(cfg.seed)
    opt = E.AdamState(lr=cfg.lr)
    params = model.parameters()
    stats: list[EpochStats] = []
    best = (-1.0, None, None)
    n = len(ytr)
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start:start + cfg.batch_size]
            xb = np.asarray(xtr[idx], dtype=np.float64)
            yb = ytr[idx]
            E.zero_grads(params)
            try:
                with E.Tape() as tape:
                    probs = model.forward(xb, "train")
                    loss = E.weighted_sce_loss(probs, yb, weights)
                    if model.l2_rate > 0:
                        loss = E.add(loss, E.l2_penalty(model.regularized(), model.l2_rate))
            except NonFiniteError as exc:
                raise DivergedLoss(epoch, bi, float("nan")) from exc
            value = float(loss.data)
            if not np.isfinite(value):
                raise DivergedLoss(epoch, bi, value)
            tape.backward(loss)
            E.adam_step(opt, params)
            loss_sum += value * len(idx)
            correct += int((probs.data.argmax(axis=1) == yb).sum())
        val_probs = predict_proba(model, xva)
        val_acc = float((val_probs.argmax(axis=1) == yva).mean())
        st = EpochStats(epoch, loss_sum / n, correct / n, _mean_ce(val_probs, yva), val_acc)
        stats.append(st)
        if progress:
            progress(st)
        log.info("epoch %d train_loss %.4f train_acc %.4f val_loss %.4f val_acc %.4f",
                 epoch, st.train_loss, st.train_acc, st.val_loss, st.val_acc)
        if cfg.selection == "last" or val_acc >= best[0]:
            best = (val_acc, epoch, model.snapshot())
    model.restore(best[2])
    meta = {"selected_epoch": best[1], "val_acc": best[0], "train_config": _cfg_dict(cfg),
            "class_weights": None if weights is None else weights.tolist()}
    return make_checkpoint(model, opt, meta), stats


def _cfg_dict(cfg: TrainConfig) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


def build_and_train(kind: str, model_cfg, data: PreparedData, cfg: TrainConfig, progress=None):
    model_cfg = apply_overrides(kind, model_cfg, cfg)
    model = create_model(kind, model_cfg, seed=cfg.seed)
    ckpt, stats = train(model, data, cfg, progress)
    return model, ckpt, stats


__all__ = ["EPOCH_FIELDS", "EpochStats", "TrainConfig", "apply_overrides", "build_and_train",
           "epochs_to_csv", "evaluate", "evaluate_model", "predict_proba", "train"]
