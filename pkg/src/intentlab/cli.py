"""Command-line entry point: synth, prepare, train, grid, eval, bench.

Configuration comes from an optional JSON file with sections ``synth``,
``pipeline``, ``model`` (``cnnlstm`` / ``toyswin``), ``train``, ``grid`` and
``bench``; explicit flags override file values. The effective configuration
is written to ``config.json`` in every output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ConfigError, DataError, IntentLabError, TooFewSamples
from .ingest import Modality, load_manifest, load_recording
from .models import MODEL_KINDS, build_model, create_model, load_checkpoint, save_checkpoint
from .models.base import config_from_dict, config_to_dict
from .pipeline import PipelineConfig, load_prepared, prepare_frames, prepare_signal, save_prepared
from .pipeline.store import class_names
from .synth import SynthSpec, write_synth_dataset
from .train_eval.bench import MIN_SAMPLES
from .train_eval import (
    DEFAULT_GRID, TrainConfig, apply_overrides, build_and_train, epochs_to_csv, evaluate_model, grid_search,
    latency_bench, latency_to_csv, model_train_fn,
)

log = logging.getLogger("intentlab")

SECTIONS = ("synth", "pipeline", "model", "train", "grid", "bench")
BENCH_DEFAULTS = {"samples": 100, "warmup": 10}


@dataclasses.dataclass
class RunConfig:
    """Union of every component config, as plain dicts keyed by field name."""

    synth: dict = dataclasses.field(default_factory=dict)
    pipeline: dict = dataclasses.field(default_factory=dict)
    model: dict = dataclasses.field(default_factory=dict)
    train: dict = dataclasses.field(default_factory=dict)
    grid: dict = dataclasses.field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_GRID.items()})
    bench: dict = dataclasses.field(default_factory=lambda: dict(BENCH_DEFAULTS))
    seed: int = 0

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(raw) - set(SECTIONS) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        rc = cls()
        for name in SECTIONS:
            if name in raw:
                if not isinstance(raw[name], dict):
                    raise ConfigError(f"config section {name!r} must be an object")
                getattr(rc, name).update(raw[name])
        rc.seed = int(raw.get("seed", 0))
        rc.validate()
        return rc

    def validate(self) -> None:
        self.synth_spec()
        self.pipeline_config()
        unknown = set(self.model) - set(MODEL_KINDS)
        if unknown:
            raise ConfigError(f"unknown model sections: {sorted(unknown)}")
        for kind in self.model:
            self.model_config(kind)
        _from_dict(TrainConfig, {**self.train, "epochs": self.train.get("epochs", 1)})
        if set(self.grid) - {"l2", "dropout"}:
            raise ConfigError("grid section accepts only l2 and dropout lists")
        if set(self.bench) - set(BENCH_DEFAULTS):
            raise ConfigError(f"bench section accepts only {sorted(BENCH_DEFAULTS)}")

    def synth_spec(self) -> SynthSpec:
        return _from_dict(SynthSpec, {"seed": self.seed, **self.synth})

    def pipeline_config(self) -> PipelineConfig:
        return _from_dict(PipelineConfig, self.pipeline)

    def model_config(self, kind: str, **shape):
        """Model config for ``kind``; ``shape`` fills input dims the file leaves unset."""
        _, cfg_cls = MODEL_KINDS[kind]
        values = {k: v for k, v in shape.items() if k not in self.model.get(kind, {})}
        values.update(self.model.get(kind, {}))
        return _from_dict(cfg_cls, values)

    def train_config(self, kind: str) -> TrainConfig:
        return TrainConfig.for_model(kind, **{"seed": self.seed, **self.train})

    def to_dict(self) -> dict:
        return {"seed": self.seed, **{n: getattr(self, n) for n in SECTIONS}}


def _from_dict(cls, data: dict):
    try:
        return config_from_dict(cls, data)
    except TypeError as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from None


def _json_default(obj):
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj):
        return config_to_dict(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def prepare_out(path, force: bool) -> Path:
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise ConfigError(f"output path {out} is not a directory")
    if out.is_dir() and any(out.iterdir()) and not force:
        raise ConfigError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_resolution(text: str) -> list[int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"resolution must look like 32x32, got {text!r}") from None
    return [h, w]


def _set(section: dict, key: str, value) -> None:
    if value is not None:
        section[key] = value


def _shape_fields(kind: str, shape: tuple) -> dict:
    if kind == "cnnlstm":
        return {"length": int(shape[0]), "channels": int(shape[1])}
    return {"frames": int(shape[0]), "height": int(shape[1]), "width": int(shape[2]), "channels": int(shape[3])}


def _check_model_fits(kind: str, data) -> None:
    want = "signal" if kind == "cnnlstm" else "frames"
    if data.modality.value != want:
        raise ConfigError(f"model {kind} needs {want} data, got {data.modality.value}")


# --- commands ---------------------------------------------------------------

def cmd_synth(args, rc: RunConfig) -> dict:
    _set(rc.synth, "subjects", args.subjects)
    _set(rc.synth, "trials", args.trials)
    spec = rc.synth_spec()
    out = prepare_out(args.out, args.force)
    mods = [Modality.SIGNAL, Modality.FRAMES] if args.modality == "both" else [Modality(args.modality)]
    manifest = write_synth_dataset(spec, out, mods)
    counts = {m.value: len(manifest.of(m)) for m in mods}
    write_json(out / "config.json", rc.to_dict())
    print(" ".join(f"{k}={v}" for k, v in counts.items()), f"manifest={out / 'manifest.csv'}")
    return counts


def cmd_prepare(args, rc: RunConfig) -> dict:
    _set(rc.pipeline, "oversample_signal" if args.modality == "signal" else "oversample_frames", args.oversample)
    _set(rc.pipeline, "frame_resolution", args.resolution)
    _set(rc.pipeline, "frame_window", args.frame_window)
    cfg = rc.pipeline_config()
    manifest = load_manifest(args.manifest)
    entries = manifest.of(Modality(args.modality))
    if not entries:
        raise DataError(f"manifest has no {args.modality} entries")
    out = prepare_out(args.out, args.force)
    recs = [load_recording(manifest, e, cfg.channel_columns) for e in entries]
    prep = prepare_signal if args.modality == "signal" else prepare_frames
    data, stats = prep(recs, cfg, seed=rc.seed)
    save_prepared(data, out)
    write_json(out / "stats.json", stats)
    write_json(out / "config.json", rc.to_dict())
    print(" ".join(f"{k}={len(v)}" for k, v in data.y.items()), f"out={out}")
    return stats


def _train_overrides(args, rc: RunConfig) -> None:
    _set(rc.train, "epochs", args.epochs)
    _set(rc.train, "batch_size", args.batch_size)
    _set(rc.train, "lr", args.lr)


def cmd_train(args, rc: RunConfig) -> dict:
    _train_overrides(args, rc)
    _set(rc.train, "l2", args.l2)
    _set(rc.train, "dropout", args.dropout)
    data = load_prepared(args.data)
    _check_model_fits(args.model, data)
    model_cfg = rc.model_config(args.model, **_shape_fields(args.model, data.window_shape()))
    tcfg = rc.train_config(args.model)
    out = prepare_out(args.out, args.force)
    effective = apply_overrides(args.model, model_cfg, tcfg)
    write_json(out / "config.json", {**rc.to_dict(), "effective_model": {args.model: effective}})
    model, ckpt, stats = build_and_train(args.model, model_cfg, data, tcfg)
    save_checkpoint(ckpt, out / "checkpoint.milc")
    (out / "epochs.csv").write_text(epochs_to_csv(stats))
    summary = {"selected_epoch": ckpt.meta["selected_epoch"], "val_acc": ckpt.meta["val_acc"]}
    if len(data.y["test"]):
        summary["test_acc"] = evaluate_model(model, data.x["test"], data.y["test"]).accuracy
    write_json(out / "summary.json", summary)
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return summary


def cmd_grid(args, rc: RunConfig) -> dict:
    _train_overrides(args, rc)
    if args.l2:
        rc.grid["l2"] = args.l2
    if args.dropout:
        rc.grid["dropout"] = args.dropout
    data = load_prepared(args.data)
    _check_model_fits(args.model, data)
    model_cfg = rc.model_config(args.model, **_shape_fields(args.model, data.window_shape()))
    tcfg = rc.train_config(args.model)
    grid = {k: [float(v) for v in rc.grid.get(k, [])] for k in ("l2", "dropout")}
    out = prepare_out(args.out, args.force)
    write_json(out / "config.json", {**rc.to_dict(), "effective_model": {args.model: model_cfg}})
    result = grid_search(model_train_fn(args.model, model_cfg, data, tcfg), grid)
    lines = ["l2,dropout,val_acc"] + [f"{p.l2!r},{p.dropout!r},{p.val_acc!r}" for p in result.points]
    (out / "grid.csv").write_text("\n".join(lines) + "\n")
    ckpt, stats = result.best.result
    save_checkpoint(ckpt, out / "checkpoint.milc")
    (out / "epochs.csv").write_text(epochs_to_csv(stats))
    best = {"l2": result.best.l2, "dropout": result.best.dropout, "val_acc": result.best.val_acc}
    write_json(out / "best.json", best)
    print(" ".join(f"{k}={v}" for k, v in best.items()))
    return best


def cmd_eval(args, rc: RunConfig) -> dict:
    ckpt = load_checkpoint(args.checkpoint)
    data = load_prepared(args.data)
    _check_model_fits(ckpt.kind, data)
    if len(data.y[args.split]) == 0:
        raise DataError(f"split {args.split} is empty")
    out = prepare_out(args.out, args.force)
    write_json(out / "config.json", rc.to_dict())
    report = evaluate_model(build_model(ckpt), data.x[args.split], data.y[args.split])
    (out / "metrics.json").write_text(report.to_json(class_names()))
    print(f"accuracy={report.accuracy} weighted_f1={report.weighted_f1}")
    return report.to_dict(class_names())


def cmd_bench(args, rc: RunConfig) -> dict:
    _set(rc.bench, "samples", args.samples)
    _set(rc.bench, "warmup", args.warmup)
    n, warmup = int(rc.bench["samples"]), int(rc.bench["warmup"])
    if n < MIN_SAMPLES:
        raise TooFewSamples(f"latency needs >= {MIN_SAMPLES} timed samples, got {n}")
    if args.checkpoint:
        model = build_model(load_checkpoint(args.checkpoint))
    else:
        model = create_model(args.model, rc.model_config(args.model), seed=rc.seed)
    if args.data:
        data = load_prepared(args.data)
        _check_model_fits(model.kind, data)
        pool = np.concatenate([data.x[s] for s in ("test", "val", "train") if len(data.y[s])])
        samples = pool[np.arange(n) % len(pool)]
    else:
        cfg = model.config
        shape = (cfg.length, cfg.channels) if model.kind == "cnnlstm" else \
            (cfg.frames, cfg.height, cfg.width, cfg.channels)
        samples = np.random.default_rng(rc.seed).standard_normal((n,) + shape)
    out = prepare_out(args.out, args.force)
    write_json(out / "config.json", rc.to_dict())
    report = latency_bench(model, samples, warmup=warmup, label=model.kind, threads=args.threads)
    (out / "latency.csv").write_text(latency_to_csv([report]))
    write_json(out / "latency.json", report.summary())
    s = report.summary()
    print(f"{s['label']} samples={s['samples']} mean_ms={s['mean_ms']:.3f} "
          f"median_ms={s['median_ms']:.3f} p95_ms={s['p95_ms']:.3f}")
    return s


# --- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config file)")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--threads", type=int, default=1, help="BLAS/OpenMP thread cap (1 = deterministic)")
    common.add_argument("--force", action="store_true", help="allow writing into a non-empty --out")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="intentlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    p.add_argument("--subjects", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--modality", choices=["both", "signal", "frames"], default="both")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", parents=[common], help="window, split, balance and scale recordings")
    p.add_argument("--manifest", required=True)
    p.add_argument("--modality", choices=["signal", "frames"], default="signal")
    p.add_argument("--oversample", type=int, help="oversampling factor for intention windows")
    p.add_argument("--resolution", type=_parse_resolution, help="frame resolution, e.g. 32x32")
    p.add_argument("--frame-window", type=int, help="frames per window")
    p.set_defaults(func=cmd_prepare)

    for name, func, helptext in (("train", cmd_train, "train one model"),
                                 ("grid", cmd_grid, "grid search over l2 and dropout")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--data", required=True, help="prepared dataset directory")
        p.add_argument("--model", choices=sorted(MODEL_KINDS), default="cnnlstm")
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", type=int)
        p.add_argument("--lr", type=float)
        if name == "train":
            p.add_argument("--l2", type=float)
            p.add_argument("--dropout", type=float)
        else:
            p.add_argument("--l2", type=float, nargs="+", help="l2 values to search")
            p.add_argument("--dropout", type=float, nargs="+", help="dropout values to search")
        p.set_defaults(func=func)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], help="batch-1 float32 latency")
    p.add_argument("--model", choices=sorted(MODEL_KINDS), default="cnnlstm")
    p.add_argument("--checkpoint", help="checkpoint to time (default: freshly initialised model)")
    p.add_argument("--data", help="prepared dataset supplying the timed inputs")
    p.add_argument("--samples", type=int)
    p.add_argument("--warmup", type=int)
    p.set_defaults(func=cmd_bench)
    return parser


def run(argv=None) -> int:
    """Parse ``argv`` and run one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        rc = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            rc.seed = args.seed
        with threadpool_limits(args.threads):
            args.func(args, rc)
    except IntentLabError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error (IoFailure): {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
