"""Minimal dense reverse-mode autodiff engine on numpy."""

from .nn import (
    GATE_ORDER,
    BatchNormState,
    CountingRNG,
    batchnorm1d,
    conv1d,
    dense,
    dropout,
    l2_penalty,
    lstm_layer,
    maxpool1d,
    weighted_sce_loss,
)
from .ops import (
    add, concat, gelu, getitem, layer_norm, matmul, mean, mul, relu, reshape, roll, softmax,
    square_sum, sub, transpose,
)
from .ops import sum as reduce_sum
from .optim import AdamState, adam_step, zero_grads
from .tensor import Param, Tape, Tensor, as_tensor

__all__ = [
    "GATE_ORDER", "AdamState", "BatchNormState", "CountingRNG", "Param", "Tape", "Tensor",
    "adam_step", "add", "as_tensor", "batchnorm1d", "concat", "conv1d", "dense", "dropout",
    "gelu", "getitem", "l2_penalty", "layer_norm", "lstm_layer", "matmul", "maxpool1d", "mean", "mul",
    "reduce_sum", "relu", "reshape", "roll", "softmax", "square_sum", "sub", "transpose",
    "weighted_sce_loss", "zero_grads",
]
