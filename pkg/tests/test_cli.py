import csv
import json

import numpy as np
import pytest

from intentlab.cli import RunConfig, run
from intentlab.errors import ConfigError
from intentlab.models import load_checkpoint

SMALL_MODEL = {"cnnlstm": {"filters": [8, 8], "lstm_units": [8, 8], "dense_hidden": 8}}


def write_config(path, **sections):
    path.write_text(json.dumps(sections))
    return str(path)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """Synthesize, then prepare, a one-subject dataset with short windows."""
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root / "cfg.json", synth={"signal_seconds": 1.6},
                       pipeline={"signal_window": 20}, model=SMALL_MODEL,
                       train={"epochs": 2, "batch_size": 32})
    assert run(["synth", "--config", cfg, "--subjects", "1", "--trials", "4", "--modality", "signal",
                "--out", str(root / "raw")]) == 0
    assert run(["prepare", "--config", cfg, "--manifest", str(root / "raw" / "manifest.csv"),
                "--out", str(root / "prep")]) == 0
    return root, cfg


def test_synth_default_counts(tmp_path, capsys):
    assert run(["synth", "--out", str(tmp_path / "d")]) == 0
    assert len(list((tmp_path / "d" / "signals").iterdir())) == 48
    assert len(list((tmp_path / "d" / "frames").iterdir())) == 48
    assert (tmp_path / "d" / "manifest.csv").is_file()
    assert "signal=48 frames=48" in capsys.readouterr().out


def test_synth_one_by_one(tmp_path):
    assert run(["synth", "--subjects", "1", "--trials", "1", "--out", str(tmp_path / "d")]) == 0
    assert len(list((tmp_path / "d" / "signals").iterdir())) == 4
    assert len(list((tmp_path / "d" / "frames").iterdir())) == 4
    echoed = json.loads((tmp_path / "d" / "config.json").read_text())
    assert echoed["synth"]["subjects"] == 1


def test_refuses_non_empty_out(tmp_path):
    out = tmp_path / "d"
    out.mkdir()
    (out / "keep.txt").write_text("x")
    assert run(["synth", "--subjects", "1", "--trials", "1", "--out", str(out)]) == 2
    assert sorted(p.name for p in out.iterdir()) == ["keep.txt"]
    assert run(["synth", "--subjects", "1", "--trials", "1", "--out", str(out), "--force"]) == 0


def test_unknown_config_key_is_rejected(tmp_path, capsys):
    for bad in ({"synth": {"subject": 2}}, {"extra": {}}, {"model": {"resnet": {}}},
                {"train": {"momentum": 0.9}}):
        cfg = write_config(tmp_path / "bad.json", **bad)
        assert run(["synth", "--config", cfg, "--out", str(tmp_path / "never")]) == 2
        assert not (tmp_path / "never").exists()  # rejected before any compute
    assert "ConfigError" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.json")


def test_missing_data_is_data_error(tmp_path):
    assert run(["prepare", "--manifest", str(tmp_path / "none.csv"), "--out", str(tmp_path / "p")]) == 3


def test_prepare_triples_intention_in_train_only(small_run):
    root, _ = small_run
    stats = json.loads((root / "prep" / "stats.json").read_text())
    for split in ("train", "val", "test"):
        before = np.array(stats["before_oversampling"][split]["class_counts"])
        after = np.array(stats["after_oversampling"][split]["class_counts"])
        factor = 3 if split == "train" else 1
        np.testing.assert_array_equal(after[0::2], factor * before[0::2])
        np.testing.assert_array_equal(after[1::2], before[1::2])


def test_prepare_oversample_one(small_run, tmp_path):
    root, cfg = small_run
    assert run(["prepare", "--config", cfg, "--manifest", str(root / "raw" / "manifest.csv"),
                "--oversample", "1", "--out", str(tmp_path / "p1")]) == 0
    stats = json.loads((tmp_path / "p1" / "stats.json").read_text())
    assert stats["before_oversampling"]["train"]["class_counts"] == \
        stats["after_oversampling"]["train"]["class_counts"]


def test_prepare_split_proportions_recount(small_run):
    root, _ = small_run
    ratios = {"train": 0.7, "val": 0.15, "test": 0.15}
    # recount recordings per (class, subject) from the written index
    units = {}
    with (root / "prep" / "index.csv").open() as fh:
        for row in csv.DictReader(fh):
            units.setdefault((row["label"], row["subject"]), {}).setdefault(
                (row["activity"], row["trial"], row["group"]), row["split"])
    for stratum in units.values():
        n = len(stratum)
        for split, r in ratios.items():
            assert abs(sum(1 for s in stratum.values() if s == split) - n * r) <= 1


def test_train_then_eval_agree(small_run, tmp_path):
    root, cfg = small_run
    assert run(["train", "--config", cfg, "--data", str(root / "prep"), "--out", str(tmp_path / "t")]) == 0
    summary = json.loads((tmp_path / "t" / "summary.json").read_text())
    lines = (tmp_path / "t" / "epochs.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc" and len(lines) == 3
    for split, key in (("val", "val_acc"), ("test", "test_acc")):
        out = tmp_path / f"e_{split}"
        assert run(["eval", "--checkpoint", str(tmp_path / "t" / "checkpoint.milc"),
                    "--data", str(root / "prep"), "--split", split, "--out", str(out)]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["accuracy"] == summary[key]
        assert len(metrics["per_class"]) == 8
    echoed = json.loads((tmp_path / "t" / "config.json").read_text())
    assert echoed["effective_model"]["cnnlstm"]["length"] == 20


def test_flags_override_config(small_run, tmp_path):
    root, cfg = small_run
    assert run(["train", "--config", cfg, "--data", str(root / "prep"), "--epochs", "1", "--l2", "0.02",
                "--out", str(tmp_path / "t")]) == 0
    assert len((tmp_path / "t" / "epochs.csv").read_text().splitlines()) == 2
    echoed = json.loads((tmp_path / "t" / "config.json").read_text())
    assert echoed["train"]["epochs"] == 1 and echoed["effective_model"]["cnnlstm"]["l2"] == 0.02


def test_singleton_grid_equals_train(small_run, tmp_path):
    root, cfg = small_run
    assert run(["train", "--config", cfg, "--data", str(root / "prep"), "--l2", "0.01", "--dropout", "0.2",
                "--out", str(tmp_path / "t")]) == 0
    assert run(["grid", "--config", cfg, "--data", str(root / "prep"), "--l2", "0.01", "--dropout", "0.2",
                "--out", str(tmp_path / "g")]) == 0
    assert (tmp_path / "g" / "epochs.csv").read_bytes() == (tmp_path / "t" / "epochs.csv").read_bytes()
    assert (tmp_path / "g" / "checkpoint.milc").read_bytes() == (tmp_path / "t" / "checkpoint.milc").read_bytes()
    grid_rows = (tmp_path / "g" / "grid.csv").read_text().splitlines()
    assert grid_rows[0] == "l2,dropout,val_acc" and len(grid_rows) == 2


def test_wrong_model_for_data(small_run, tmp_path):
    root, cfg = small_run
    assert run(["train", "--data", str(root / "prep"), "--model", "toyswin", "--out", str(tmp_path / "t")]) == 2


@pytest.mark.parametrize("kind", ["cnnlstm", "toyswin"])
def test_bench_default_models(kind, tmp_path):
    assert run(["bench", "--model", kind, "--out", str(tmp_path / "b")]) == 0
    summary = json.loads((tmp_path / "b" / "latency.json").read_text())
    assert summary["samples"] >= 100 and summary["mean_ms"] > 0 and summary["hardware"]
    rows = [r for r in (tmp_path / "b" / "latency.csv").read_text().splitlines() if not r.startswith("#")]
    assert len(rows) - 1 == summary["samples"]


def test_bench_checkpoint_on_prepared_data(small_run, tmp_path):
    root, cfg = small_run
    assert run(["train", "--config", cfg, "--data", str(root / "prep"), "--out", str(tmp_path / "t")]) == 0
    assert run(["bench", "--checkpoint", str(tmp_path / "t" / "checkpoint.milc"), "--data", str(root / "prep"),
                "--samples", "120", "--warmup", "3", "--out", str(tmp_path / "b")]) == 0
    assert json.loads((tmp_path / "b" / "latency.json").read_text())["samples"] == 120
    assert load_checkpoint(tmp_path / "t" / "checkpoint.milc").kind == "cnnlstm"


def test_too_few_bench_samples(tmp_path):
    assert run(["bench", "--samples", "10", "--out", str(tmp_path / "b")]) == 2
    assert not (tmp_path / "b").exists()
