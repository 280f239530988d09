from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intentlab import engine as E
from intentlab.errors import (
    BadRange, ChannelMismatch, ConfigError, EmptyClass, EmptyInput, NonPositiveSigma, OutOfRange,
    TooShort, ZeroCountClass,
)
from intentlab.ingest import Activity, FrameSequence, Modality, SignalRecording
from intentlab.pipeline import (
    NUM_CLASSES, ClassLabel, Group, GroupSegment, LabeledExample, PipelineConfig, Provenance,
    RecordingId, ScalerParams, allocate, apply_scaler, augment_frames, augment_signal_gaussian,
    compute_class_weights, fit_scaler, label_counts, load_prepared, oversample_minority,
    prepare_frames, prepare_signal, resize_bilinear, save_prepared, scale_frames, segment_windows,
    split_groups, stratified_split, window_starts,
)
from intentlab.synth import SynthSpec, synth_signal_dataset

import oracles


def sig(n, c=4, subject=1, activity=Activity.LIFTING, trial=1, seed=0):
    rows = np.random.default_rng(seed).normal(size=(n, c))
    return SignalRecording(subject, activity, trial, rows)


def example(label, subject=1, trial=0, start=0, window=None, modality=Modality.SIGNAL):
    label = ClassLabel(label)
    w = np.zeros((4, 2)) if window is None else window
    return LabeledExample(label, w, Provenance(subject, label.activity, trial, label.group, start, 0, modality))


# --- labels -------------------------------------------------------------------------

def test_eight_classes_in_order():
    assert NUM_CLASSES == 8
    assert [c.name for c in ClassLabel] == [
        "LiftingIntention", "ActualLifting", "CarryingIntention", "ActualCarrying",
        "HoldingIntention", "ActualHolding", "MountingIntention", "ActualMounting"]
    for c in ClassLabel:
        assert ClassLabel.of(c.activity, c.group) is c


# --- group split -------------------------------------------------------------------------

def test_split_groups_signal_2000_rows():
    rec = sig(2000)
    intent, actual = split_groups(rec, 1.0)
    assert intent.group is Group.INTENTION and actual.group is Group.ACTUAL
    np.testing.assert_array_equal(intent.data, rec.rows[:500])
    np.testing.assert_array_equal(actual.data, rec.rows[500:])


def test_split_groups_frames_432_at_60fps():
    seq = FrameSequence(1, Activity.HOLDING, 1, np.zeros((432, 2, 2, 3)), fps=60)
    intent, actual = split_groups(seq, 1.0)
    boundary = sum(1 for i in range(432) if i < 1.0 * 60)  # brute-force index enumeration
    assert intent.data.shape[0] == boundary == 60
    assert actual.data.shape[0] == 432 - boundary == 372


def test_split_groups_too_short():
    with pytest.raises(TooShort):
        split_groups(sig(500), 1.0)


def test_split_groups_round_half_up():
    rec = SignalRecording(1, Activity.LIFTING, 1, np.zeros((10, 1)), sample_rate_hz=3)
    assert split_groups(rec, 0.5)[0].data.shape[0] == 2  # 1.5 rounds up


# --- windowing ------------------------------------------------------------------------

def seg(n, group=Group.ACTUAL):
    rid = RecordingId(1, Activity.CARRYING, 2, Modality.SIGNAL)
    return GroupSegment(rid, group, np.arange(n * 2, dtype=float).reshape(n, 2))


def test_paper_windowing_nine_windows():
    ws = segment_windows(seg(500, Group.INTENTION), 100, 0.5)
    assert [w.provenance.start for w in ws] == list(range(0, 401, 50))
    assert all(w.label is ClassLabel.CarryingIntention for w in ws)
    assert all(w.window.shape == (100, 2) for w in ws)


@pytest.mark.parametrize("overlap", [0.0, 0.3, 0.5, 0.9])
def test_exact_fit_is_one_window(overlap):
    assert len(segment_windows(seg(100), 100, overlap)) == 1


def test_short_segment_is_empty(caplog):
    assert segment_windows(seg(99), 100, 0.5) == []
    assert "shorter than window" in caplog.text


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 400), st.integers(1, 120), st.floats(0.0, 0.99))
def test_window_starts_match_brute_force(n, length, overlap):
    assert window_starts(n, length, overlap) == oracles.enumerate_window_starts(n, length, overlap)


def test_windows_cover_prefix_and_share_half():
    ws = segment_windows(seg(437), 100, 0.5)
    covered = set()
    for w in ws:
        covered.update(range(w.provenance.start, w.provenance.start + 100))
    assert covered == set(range(ws[-1].provenance.start + 100))
    for a, b in zip(ws, ws[1:]):
        assert len(set(range(a.provenance.start, a.provenance.start + 100))
                   & set(range(b.provenance.start, b.provenance.start + 100))) == 50


def test_window_contents_are_slices():
    s = seg(300)
    for w in segment_windows(s, 100, 0.5):
        np.testing.assert_array_equal(w.window, s.data[w.provenance.start:w.provenance.start + 100])


# --- splits -----------------------------------------------------------------------------

def test_allocate_examples():
    assert allocate(100, (0.7, 0.15, 0.15)) == [70, 15, 15]
    assert allocate(3, (0.7, 0.15, 0.15)) == [2, 1, 0]  # [1, 1, 1] would miss train's 2.1 by 1.1
    assert allocate(7, (0.7, 0.15, 0.15)) == [5, 1, 1]
    for n in range(0, 300):
        counts = allocate(n, (0.7, 0.15, 0.15))
        assert sum(counts) == n
        assert all(abs(c - n * r) <= 1 for c, r in zip(counts, (0.7, 0.15, 0.15)))


def test_stratified_100_of_one_class():
    exs = [example(1, start=i) for i in range(100)]
    split = stratified_split(exs, unit="example")
    assert (len(split.train), len(split.val), len(split.test)) == (70, 15, 15)


@pytest.mark.parametrize("ratios", [(1.0, 0.0, 0.0), (0.5, 0.5), (0.6, 0.3, 0.3), (-0.1, 0.6, 0.5)])
def test_bad_ratios(ratios):
    with pytest.raises(ConfigError):
        stratified_split([example(0)], ratios)


def mixed_examples(seed=0):
    rng = np.random.default_rng(seed)
    exs = []
    for label in range(8):
        for subject in (1, 2, 3):
            for i in range(int(rng.integers(5, 40))):
                exs.append(example(label, subject, trial=i % 4, start=i))
    return exs


def test_stratified_partition_and_proportions():
    exs = mixed_examples()
    split = stratified_split(exs, unit="example", seed=3)
    ids = [id(e) for part in (split.train, split.val, split.test) for e in part]
    assert sorted(ids) == sorted(id(e) for e in exs)
    strata = Counter((int(e.label), e.provenance.subject_id) for e in exs)
    for i, part in enumerate((split.train, split.val, split.test)):
        got = Counter((int(e.label), e.provenance.subject_id) for e in part)
        for key, n in strata.items():
            assert abs(got[key] - n * split.ratios[i]) <= 1


def test_recording_unit_keeps_segments_together():
    split = stratified_split(mixed_examples(), unit="recording", seed=1)
    where = {}
    for name, part in split.items():
        for e in part:
            assert where.setdefault(e.provenance.recording_key(), name) == name


def test_split_determinism_and_order_independence():
    exs = mixed_examples()
    a = stratified_split(exs, unit="example", seed=7)
    b = stratified_split(list(reversed(exs)), unit="example", seed=7)
    c = stratified_split(exs, unit="example", seed=8)
    keys = lambda s: [sorted(e.provenance.key() for e in part) for _, part in s.items()]
    assert keys(a) == keys(b)
    # a different seed only moves examples within their stratum
    strata = lambda s: [sorted(Counter((int(e.label), e.provenance.subject_id) for e in p).items())
                        for _, p in s.items()]
    assert strata(a) == strata(c)
    assert keys(a) != keys(c)


def test_split_empty_class_when_required():
    with pytest.raises(EmptyClass):
        stratified_split([example(0)], required_classes=list(ClassLabel))


# --- oversampling -------------------------------------------------------------------------

def test_oversample_thirty_plus_hundred():
    exs = [example(0, start=i) for i in range(10)] + [example(1, start=i) for i in range(100)]
    out = oversample_minority(exs, 3, {Group.INTENTION}, seed=0)
    assert label_counts(out)[[0, 1]].tolist() == [30, 100]
    for e in out:  # duplicates keep their contents
        assert any(e.window is x.window for x in exs)


def test_oversample_factor_one_is_permutation():
    exs = [example(i % 8, start=i) for i in range(40)]
    out = oversample_minority(exs, 1, {Group.INTENTION}, seed=5)
    assert sorted(map(id, out)) == sorted(map(id, exs))


def test_oversample_no_targets_keeps_multiset():
    exs = [example(i % 8, start=i) for i in range(40)]
    out = oversample_minority(exs, 3, set(), seed=5)
    assert sorted(map(id, out)) == sorted(map(id, exs))


def test_oversample_rejects_zero_factor():
    with pytest.raises(ConfigError):
        oversample_minority([example(0)], 0)


# --- signal noise ------------------------------------------------------------------------

def test_gaussian_noise_law_of_large_numbers():
    x = np.zeros((25_000, 4))
    e = example(0, window=x)
    sigma = 0.3
    d = augment_signal_gaussian(e, sigma, seed=1).window - x
    assert d.size == 100_000
    assert abs(d.mean()) <= 5 * sigma / np.sqrt(d.size)
    assert abs(d.std() / sigma - 1) <= 0.02


def test_gaussian_noise_small_sigma_and_determinism():
    e = example(0, window=np.random.default_rng(0).normal(size=(50, 4)))
    np.testing.assert_allclose(augment_signal_gaussian(e, 1e-12).window, e.window, atol=1e-10)
    a = augment_signal_gaussian(e, 0.1, seed=4)
    b = augment_signal_gaussian(e, 0.1, seed=4)
    assert a.window.tobytes() == b.window.tobytes()
    assert a.label == e.label and a.provenance == e.provenance
    with pytest.raises(NonPositiveSigma):
        augment_signal_gaussian(e, 0.0)


# --- frame augmentation -----------------------------------------------------------------------

def clip(values):
    return example(0, window=np.asarray(values, dtype=np.float64), modality=Modality.FRAMES)


def test_flip_twice_is_identity():
    x = np.random.default_rng(0).random((3, 4, 5, 3))
    once = augment_frames(clip(x), {"horizontal_flip": 1.0}).window
    np.testing.assert_array_equal(once, x[:, :, ::-1])
    twice = augment_frames(clip(once), {"horizontal_flip": 1.0}).window
    np.testing.assert_array_equal(twice, x)


def test_brightness_delta():
    out = augment_frames(clip(np.full((2, 3, 3, 3), 0.5)), {"brightness": 0.1}).window
    np.testing.assert_allclose(out, 0.6, atol=1e-12)


def test_same_transform_on_every_frame():
    frame = np.random.default_rng(1).random((4, 4, 3))
    x = np.stack([frame, frame, np.zeros_like(frame), frame])
    for seed in range(5):
        out = augment_frames(clip(x), None, seed=seed).window
        noiseless = augment_frames(clip(x), {k: v for k, v in _no_noise().items()}, seed=seed).window
        np.testing.assert_array_equal(noiseless[0], noiseless[1])
        np.testing.assert_array_equal(noiseless[0], noiseless[3])
        assert out.min() >= 0 and out.max() <= 1


def _no_noise():
    from intentlab.pipeline import DEFAULT_FRAME_AUGMENT
    return {k: v for k, v in DEFAULT_FRAME_AUGMENT.items() if k != "gaussian_noise"}


def test_frame_augment_ranges_checked():
    with pytest.raises(BadRange):
        augment_frames(clip(np.zeros((1, 2, 2, 3))), {"brightness": (-0.9, 0.1)})
    with pytest.raises(BadRange):
        augment_frames(clip(np.zeros((1, 2, 2, 3))), {"sharpen": 1.0})
    with pytest.raises(BadRange):
        augment_frames(example(0), {"brightness": 0.1})


# --- scaler -----------------------------------------------------------------------------

def two_pass(rows):
    n = len(rows)
    mean = [sum(r[c] for r in rows) / n for c in range(len(rows[0]))]
    var = [sum((r[c] - mean[c]) ** 2 for r in rows) / n for c in range(len(rows[0]))]
    return mean, [v ** 0.5 for v in var]


def test_scaler_symmetric_channel():
    p = fit_scaler([np.array([[-1.0], [1.0]])])
    assert p.mean[0] == 0 and p.std[0] == 1


def test_scaler_constant_channel():
    x = np.column_stack([np.full(10, 3.0), np.arange(10.0)])
    p = fit_scaler([x])
    assert p.mean[0] == 3 and p.std[0] == 0 and p.constant[0] and p.divisor[0] == 1
    assert not apply_scaler(p, x)[:, 0].any()


def test_scaler_matches_two_pass_oracle():
    rng = np.random.default_rng(0)
    windows = [rng.normal(5, 3, size=(20, 4)) * [1, 10, 0.1, 1000] for _ in range(15)]
    p = fit_scaler(windows)
    mean, std = two_pass([list(r) for w in windows for r in w])
    np.testing.assert_allclose(p.mean, mean, rtol=1e-9)
    np.testing.assert_allclose(p.std, std, rtol=1e-9)


def test_scaler_defining_property():
    rng = np.random.default_rng(1)
    windows = [rng.normal(-2, 7, size=(30, 4)) for _ in range(10)]
    p = fit_scaler(windows)
    z = np.concatenate([apply_scaler(p, w) for w in windows])
    assert np.abs(z.mean(axis=0)).max() <= 1e-6
    assert np.abs(z.std(axis=0) - 1).max() <= 1e-6


def test_scaler_identity_and_errors():
    x = np.random.default_rng(0).normal(size=(5, 4))
    ident = ScalerParams(np.zeros(4), np.ones(4))
    np.testing.assert_array_equal(apply_scaler(ident, x), x)
    with pytest.raises(ChannelMismatch):
        apply_scaler(ident, x[:, :3])
    with pytest.raises(EmptyInput):
        fit_scaler([])


# --- pixel scaling -----------------------------------------------------------------------

def test_scale_frames_extremes():
    s = FrameSequence(1, Activity.LIFTING, 1, np.full((1, 4, 4, 3), 255.0))
    assert np.all(scale_frames(s, None).frames == 1.0)
    z = FrameSequence(1, Activity.LIFTING, 1, np.zeros((1, 4, 4, 3)))
    assert np.all(scale_frames(z, None).frames == 0.0)
    with pytest.raises(OutOfRange):
        scale_frames(FrameSequence(1, Activity.LIFTING, 1, np.full((1, 2, 2, 3), 256.0)), None)


def test_bilinear_constant_preserving():
    out = resize_bilinear(np.full((1, 2, 2, 3), 0.37), 4, 4)
    assert out.shape == (1, 4, 4, 3)
    np.testing.assert_allclose(out, 0.37, atol=1e-15)


def test_scaled_sequence_not_divided_twice():
    s = FrameSequence(1, Activity.LIFTING, 1, np.full((1, 2, 2, 3), 0.5), scaled=True)
    np.testing.assert_allclose(scale_frames(s, (4, 4)).frames, 0.5)


# --- class weights ------------------------------------------------------------------------

def test_class_weights():
    np.testing.assert_array_equal(compute_class_weights([5, 5, 5]), [1.0, 1.0, 1.0])
    np.testing.assert_allclose(compute_class_weights([10, 30]), [2.0, 0.6667], atol=5e-5)
    counts = np.array([3, 17, 40, 1])
    assert np.mean(compute_class_weights(counts) * counts) == pytest.approx(counts.sum() / 4, rel=1e-15)
    with pytest.raises(ZeroCountClass):
        compute_class_weights([3, 0])


def test_uniform_class_weights_leave_loss_unchanged():
    rng = np.random.default_rng(0)
    probs = E.softmax(E.Tensor(rng.normal(size=(32, 8))))
    y = rng.integers(0, 8, 32)
    w = compute_class_weights(np.full(8, 12))
    a = E.weighted_sce_loss(probs, y, w).data
    b = E.weighted_sce_loss(probs, y).data
    assert a.tobytes() == b.tobytes()


# --- end to end ---------------------------------------------------------------------------

SMALL = SynthSpec(subjects=2, trials=2, signal_seconds=2.0)


def test_prepare_signal_counts_and_scaling():
    data, stats = prepare_signal(synth_signal_dataset(SMALL), PipelineConfig(), seed=0)
    before = np.array(stats["before_oversampling"]["train"]["class_counts"])
    after = np.array(stats["after_oversampling"]["train"]["class_counts"])
    np.testing.assert_array_equal(after[0::2], 3 * before[0::2])
    np.testing.assert_array_equal(after[1::2], before[1::2])
    z = data.x["train"].reshape(-1, 4).astype(np.float64)
    assert np.abs(z.mean(axis=0)).max() <= 1e-6
    assert np.abs(z.std(axis=0) - 1).max() <= 1e-6
    assert data.x["train"].shape[1:] == (100, 4)


def test_prepared_store_roundtrip(tmp_path):
    data, _ = prepare_signal(synth_signal_dataset(SMALL), PipelineConfig(), seed=0)
    save_prepared(data, tmp_path)
    back = load_prepared(tmp_path)
    for name in ("train", "val", "test"):
        assert back.x[name].tobytes() == data.x[name].tobytes()
        np.testing.assert_array_equal(back.y[name], data.y[name])
        assert back.provenance[name] == data.provenance[name]
    assert (tmp_path / "train.labels").stat().st_size == len(data.y["train"])


def test_prepare_frames_augment_copies():
    from intentlab.synth import synth_frame_dataset
    spec = SynthSpec(subjects=1, trials=3, video_seconds=1.5, frame_size=(16, 16))
    cfg = PipelineConfig(frame_window=8, frame_resolution=(16, 16), augment_copies=2)
    data, stats = prepare_frames(synth_frame_dataset(spec), cfg, seed=0)
    before = sum(stats["before_oversampling"]["train"]["class_counts"])
    assert len(data.y["train"]) == 3 * before
    assert data.x["train"].min() >= 0 and data.x["train"].max() <= 1
