"""Classifiers for both modalities plus checkpoint IO."""

from .base import Model, config_from_dict, config_to_dict
from .checkpoint import (
    MODEL_KINDS, Checkpoint, build_model, load_checkpoint, load_into, make_checkpoint,
    save_checkpoint,
)
from .cnn_lstm import CnnLstm, CnnLstmConfig, cnn_lstm_forward
from .swin import (
    MASK_NEG, ToySwin, ToySwinConfig, build_shift_mask, cyclic_shift3d, partition_windows3d,
    patch_merge, reverse_windows3d, toy_swin_forward, wmsa3d,
)


def create_model(kind: str, config=None, seed: int = 0) -> Model:
    cls, _ = MODEL_KINDS[kind]
    return cls(config, seed=seed)


__all__ = [
    "MASK_NEG", "MODEL_KINDS", "Checkpoint", "CnnLstm", "CnnLstmConfig", "Model", "ToySwin",
    "ToySwinConfig", "build_model", "build_shift_mask", "cnn_lstm_forward", "config_from_dict",
    "config_to_dict", "create_model", "cyclic_shift3d", "load_checkpoint", "load_into",
    "make_checkpoint", "partition_windows3d", "patch_merge", "reverse_windows3d",
    "save_checkpoint", "toy_swin_forward", "wmsa3d",
]
