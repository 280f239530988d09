import time

import numpy as np
import pytest

from intentlab.errors import ConfigError, DivergedLoss, EmptyGrid, EmptySplit, TooFewSamples
from intentlab.models import CnnLstmConfig, build_model, create_model
from intentlab.pipeline import PipelineConfig, prepare_signal
from intentlab.synth import SynthSpec, synth_signal_dataset
from intentlab.train_eval import (
    DEFAULT_GRID, PAPER_GRID, GridPoint, LatencyReport, MetricsReport, TrainConfig,
    build_and_train, confusion_matrix, epochs_to_csv, evaluate, grid_search, latency_bench,
    latency_to_csv, metrics_from_predictions, model_train_fn, select_best, train,
)

import oracles

SMALL_CNN = CnnLstmConfig(length=20, filters=(8, 8), lstm_units=(8, 8), dense_hidden=8)


@pytest.fixture(scope="module")
def small_data():
    spec = SynthSpec(subjects=1, trials=4, signal_seconds=1.6)
    data, _ = prepare_signal(synth_signal_dataset(spec), PipelineConfig(signal_window=20), seed=0)
    return data


# --- metrics ------------------------------------------------------------------------

def test_worked_two_class_matrix():
    r = MetricsReport.from_matrix([[8, 2], [1, 9]])
    assert r.accuracy == 0.85
    assert r.f1[0] == pytest.approx(0.8421, abs=5e-5)
    assert r.f1[1] == pytest.approx(0.8571, abs=5e-5)
    assert r.weighted_f1 == pytest.approx(0.8496, abs=5e-5)


def test_recall_98_of_129():
    cm = np.zeros((8, 8), dtype=int)
    cm[3, 3], cm[3, 5] = 98, 31
    cm[0, 0] = 10
    assert MetricsReport.from_matrix(cm).recall[3] == 98 / 129


def test_perfect_predictions():
    y = np.arange(8).repeat(5)
    r = metrics_from_predictions(y, y, 8)
    np.testing.assert_array_equal(r.matrix, np.diag(np.full(8, 5)))
    assert r.accuracy == 1.0 and r.weighted_f1 == 1.0


def test_random_matrices_match_direct_oracle():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        k = int(rng.integers(2, 9))
        cm = rng.integers(0, 30, size=(k, k)) * (rng.random((k, k)) < 0.7)
        if cm.sum() == 0:
            cm[0, 0] = 1
        r = MetricsReport.from_matrix(cm)
        wf1, acc = oracles.weighted_f1_direct(cm.tolist())
        assert abs(r.weighted_f1 - wf1) <= 1e-12
        assert abs(r.accuracy - acc) <= 1e-12
        assert 0 <= r.weighted_f1 <= 1


def test_confusion_matrix_counts():
    cm = confusion_matrix([0, 1, 1, 2], [0, 2, 1, 2], 3)
    np.testing.assert_array_equal(cm, [[1, 0, 0], [0, 1, 1], [0, 0, 1]])
    assert cm.sum() == 4


def test_balanced_accuracy_of_constant_predictor():
    y = np.array([0] * 50 + [1] * 5 + [2] * 20)
    for c in range(3):
        r = metrics_from_predictions(y, np.full_like(y, c), 3)
        assert r.balanced_accuracy == pytest.approx(1 / 3)


def test_metrics_empty():
    with pytest.raises(EmptySplit):
        metrics_from_predictions([], [], 8)
    with pytest.raises(EmptySplit):
        MetricsReport.from_matrix(np.zeros((3, 3), dtype=int))


def test_metrics_json_fields():
    d = MetricsReport.from_matrix([[8, 2], [1, 9]]).to_dict(["a", "b"])
    assert set(d) >= {"matrix", "per_class", "accuracy", "weighted_f1"}
    assert d["per_class"][1]["class"] == "b" and d["per_class"][1]["support"] == 10


# --- grid search ------------------------------------------------------------------------

def test_grid_argmax_matches_stub():
    def acc(l2, dr):
        return 1.0 - (l2 - 0.05) ** 2 - (dr - 0.35) ** 2

    res = grid_search(lambda l2, dr: (acc(l2, dr), None), DEFAULT_GRID)
    want = max(((l2, dr) for l2 in DEFAULT_GRID["l2"] for dr in DEFAULT_GRID["dropout"]),
               key=lambda p: acc(*p))
    assert (res.best.l2, res.best.dropout) == want
    assert len(res.table()) == 27


def test_grid_tie_break():
    pts = [GridPoint(0.1, 0.2, 0.9), GridPoint(0.05, 0.3, 0.9), GridPoint(0.05, 0.1, 0.9), GridPoint(0.0001, 0.5, 0.8)]
    best = select_best(pts)
    assert (best.l2, best.dropout) == (0.05, 0.1)


def test_grid_singleton_and_empty():
    res = grid_search(lambda l2, dr: (0.5, "x"), {"l2": [0.01], "dropout": [0.2]})
    assert (res.best.l2, res.best.dropout, res.best.result) == (0.01, 0.2, "x")
    with pytest.raises(EmptyGrid):
        grid_search(lambda l2, dr: (0.0, None), {"l2": [], "dropout": [0.1]})
    with pytest.raises(EmptyGrid):
        select_best([])


def test_paper_grid_values():
    assert PAPER_GRID["l2"] == (0.0001, 0.05, 0.1)
    np.testing.assert_allclose(PAPER_GRID["dropout"], np.arange(0.1, 0.5001, 0.05))


def test_singleton_grid_equals_train(small_data):
    tcfg = TrainConfig(epochs=2, batch_size=32, seed=3)
    res = grid_search(model_train_fn("cnnlstm", SMALL_CNN, small_data, tcfg), {"l2": [0.01], "dropout": [0.2]})
    _, ckpt, stats = build_and_train("cnnlstm", SMALL_CNN, small_data,
                                     TrainConfig(epochs=2, batch_size=32, seed=3, l2=0.01, dropout=0.2))
    g_ckpt, g_stats = res.best.result
    assert epochs_to_csv(g_stats) == epochs_to_csv(stats)
    for name, arr in ckpt.params.items():
        assert g_ckpt.params[name].tobytes() == arr.tobytes()


# --- training -------------------------------------------------------------------------

def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(lr=-1.0)
    with pytest.raises(ConfigError):
        TrainConfig(selection="early_stop")
    assert TrainConfig.for_model("toyswin").batch_size == 32
    assert TrainConfig.for_model("cnnlstm").epochs == 1000


def test_zero_lr_leaves_parameters(small_data):
    model = create_model("cnnlstm", SMALL_CNN, seed=0)
    before = {n: p.data.copy() for n, p in model.params.items()}
    _, stats = train(model, small_data, TrainConfig(epochs=1, batch_size=32, lr=0.0))
    assert len(stats) == 1
    for n, p in model.params.items():
        assert p.data.tobytes() == before[n].tobytes()


def test_same_seed_identical_trajectories(small_data):
    runs = [build_and_train("cnnlstm", SMALL_CNN, small_data, TrainConfig(epochs=3, batch_size=32, seed=5))
            for _ in range(2)]
    assert epochs_to_csv(runs[0][2]) == epochs_to_csv(runs[1][2])
    other = build_and_train("cnnlstm", SMALL_CNN, small_data, TrainConfig(epochs=3, batch_size=32, seed=6))
    assert epochs_to_csv(other[2]) != epochs_to_csv(runs[0][2])


def test_selected_checkpoint_reproduces_val_accuracy(small_data):
    _, ckpt, stats = build_and_train("cnnlstm", SMALL_CNN, small_data, TrainConfig(epochs=4, batch_size=32))
    best = max(s.val_acc for s in stats)
    assert ckpt.meta["val_acc"] == best
    # ties go to the latest epoch
    assert ckpt.meta["selected_epoch"] == max(s.epoch for s in stats if s.val_acc == best)
    assert evaluate(ckpt, small_data.x["val"], small_data.y["val"]).accuracy == best
    for s in stats:
        assert 0 <= s.train_acc <= 1 and 0 <= s.val_acc <= 1


def test_empty_split_and_divergence(small_data):
    from intentlab.pipeline import PreparedData
    empty = PreparedData(small_data.modality, {**small_data.x, "val": small_data.x["val"][:0]},
                         {**small_data.y, "val": small_data.y["val"][:0]})
    with pytest.raises(EmptySplit):
        train(create_model("cnnlstm", SMALL_CNN), empty, TrainConfig(epochs=1))
    with pytest.raises(DivergedLoss):
        train(create_model("cnnlstm", SMALL_CNN), small_data, TrainConfig(epochs=2, lr=1e300))


def test_epochs_csv_header():
    from intentlab.train_eval import EpochStats
    text = epochs_to_csv([EpochStats(1, 0.5, 0.25, 0.75, 0.125)])
    assert text.splitlines() == ["epoch,train_loss,train_acc,val_loss,val_acc", "1,0.5,0.25,0.75,0.125"]


# --- latency --------------------------------------------------------------------------------

class SleepyModel:
    kind = "stub"

    def astype(self, dtype):
        return self

    def predict(self, x):
        time.sleep(0.001)
        return np.zeros((len(x), 8))


def test_latency_stub_one_ms():
    rep = latency_bench(SleepyModel(), np.zeros((100, 3)), warmup=5)
    assert len(rep.times_ms) == 100
    assert 1.0 <= rep.mean_ms <= 3.0  # sleep overshoots by scheduler slack
    assert rep.median_ms <= rep.p95_ms


def test_latency_warmup_excluded():
    calls = []

    class Counting(SleepyModel):
        def predict(self, x):
            calls.append(1)
            return np.zeros((1, 8))

    rep = latency_bench(Counting(), np.zeros((120, 3)), warmup=7)
    assert len(calls) == 127 and len(rep.times_ms) == 120


def test_latency_too_few():
    with pytest.raises(TooFewSamples):
        latency_bench(SleepyModel(), np.zeros((0, 3)))
    with pytest.raises(TooFewSamples):
        latency_bench(SleepyModel(), np.zeros((99, 3)))


def test_latency_csv_layout():
    rep = LatencyReport("m", [1.0, 2.0, 3.0], 0, "hw")
    lines = latency_to_csv([rep]).splitlines()
    assert lines[0] == "label,sample,latency_ms" and len(lines) == 5
    assert lines[-1].startswith("# m: samples=3 mean_ms=2.0000")


def test_latency_runs_float32_model():
    model = create_model("cnnlstm", SMALL_CNN, seed=0)
    x = np.random.default_rng(0).normal(size=(100, 20, 4))
    rep = latency_bench(model, x, warmup=2)
    assert len(rep.times_ms) == 100 and rep.mean_ms > 0
    assert model.params["out.W"].data.dtype == np.float64  # the trained copy is untouched
