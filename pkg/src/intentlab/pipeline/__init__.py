"""Recording -> labelled, balanced, scaled dataset transformations."""

from .augment import (
    DEFAULT_FRAME_AUGMENT, FRAME_OPS, augment_frames, augment_signal_gaussian, provenance_seed,
)
from .labels import (
    NUM_CLASSES, ClassLabel, Group, GroupSegment, LabeledExample, Provenance, RecordingId,
    label_counts,
)
from .prepare import PipelineConfig, prepare_frames, prepare_signal
from .scaling import (
    ScalerParams, apply_scaler, compute_class_weights, fit_scaler, resize_bilinear, scale_frames,
)
from .splits import SPLIT_NAMES, SplitAssignment, allocate, oversample_minority, stratified_split
from .store import PreparedData, load_prepared, save_prepared
from .windows import round_half_up, segment_windows, split_groups, window_starts, window_stride

__all__ = [
    "DEFAULT_FRAME_AUGMENT", "FRAME_OPS", "NUM_CLASSES", "SPLIT_NAMES", "ClassLabel", "Group",
    "GroupSegment", "LabeledExample", "PipelineConfig", "PreparedData", "Provenance",
    "RecordingId", "ScalerParams", "SplitAssignment", "allocate", "apply_scaler",
    "augment_frames", "augment_signal_gaussian", "compute_class_weights", "fit_scaler",
    "label_counts", "load_prepared", "oversample_minority", "prepare_frames", "prepare_signal",
    "provenance_seed", "resize_bilinear", "round_half_up", "save_prepared", "scale_frames",
    "segment_windows", "split_groups", "stratified_split", "window_starts", "window_stride",
]
