"""CNN-LSTM classifier for fixed-length multichannel signal windows.

Layer order: two [conv1d -> relu -> batchnorm -> maxpool -> dropout] blocks,
two sequence-returning LSTM layers, flatten, a ReLU hidden dense layer,
dropout, and an 8-way softmax output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import engine as E
from ..errors import ConfigError, ShapeMismatch
from .base import Model, glorot, orthogonal


@dataclass
class CnnLstmConfig:
    length: int = 100
    channels: int = 4
    filters: tuple = (64, 128)
    kernel_size: int = 3
    padding: str = "valid"
    conv_activation: str = "relu"
    pool_window: int = 2
    pool_stride: int = 2
    dropout: float = 0.4
    lstm_units: tuple = (64, 64)
    dense_hidden: int = 64
    num_classes: int = 8
    l2: float = 0.05
    bn_momentum: float = 0.9
    bn_eps: float = 1e-3

    def __post_init__(self):
        if len(self.filters) != 2 or len(self.lstm_units) != 2:
            raise ConfigError("CNN-LSTM needs exactly 2 conv blocks and 2 LSTM layers")
        if self.padding not in ("valid", "same"):
            raise ConfigError(f"padding must be valid|same, got {self.padding!r}")
        if self.conv_activation not in ("relu", "none"):
            raise ConfigError(f"conv_activation must be relu|none, got {self.conv_activation!r}")
        if not 0 <= self.dropout < 1 or self.l2 < 0:
            raise ConfigError("dropout must lie in [0, 1) and l2 must be >= 0")
        if self.sequence_lengths()[-1] < 1:
            raise ConfigError(f"input length {self.length} too short for the conv/pool stack")

    def sequence_lengths(self) -> list[int]:
        """Time extent after each conv and pool stage."""
        out = []
        n = self.length
        for _ in self.filters:
            n = n - self.kernel_size + 1 if self.padding == "valid" else n
            out.append(n)
            n = (n - self.pool_window) // self.pool_stride + 1 if n >= self.pool_window else 0
            out.append(n)
        return out


class CnnLstm(Model):
    kind = "cnnlstm"

    def __init__(self, config: CnnLstmConfig | None = None, seed: int = 0):
        super().__init__(config or CnnLstmConfig(), seed)
        cfg = self.config
        init = np.random.default_rng(seed)
        cin = cfg.channels
        self.bn_states = []
        for i, cout in enumerate(cfg.filters, 1):
            k = cfg.kernel_size
            self._add(f"conv{i}.kernel", glorot(init, k * cin, k * cout, (k, cin, cout)))
            self._add(f"conv{i}.bias", np.zeros(cout))
            self._add(f"bn{i}.gamma", np.ones(cout))
            self._add(f"bn{i}.beta", np.zeros(cout))
            self.bn_states.append(E.BatchNormState(cout))
            cin = cout
        din = cin
        for i, h in enumerate(cfg.lstm_units, 1):
            self._add(f"lstm{i}.W", glorot(init, din, 4 * h, (din, 4 * h)))
            self._add(f"lstm{i}.U", np.concatenate([orthogonal(init, h, h) for _ in range(4)], axis=1))
            b = np.zeros(4 * h)
            b[h:2 * h] = 1.0  # forget-gate bias
            self._add(f"lstm{i}.b", b)
            din = h
        flat = cfg.sequence_lengths()[-1] * cfg.lstm_units[-1]
        out_in = flat
        if cfg.dense_hidden:
            self._add("dense1.W", glorot(init, flat, cfg.dense_hidden, (flat, cfg.dense_hidden)))
            self._add("dense1.b", np.zeros(cfg.dense_hidden))
            out_in = cfg.dense_hidden
        self._add("out.W", glorot(init, out_in, cfg.num_classes, (out_in, cfg.num_classes)))
        self._add("out.b", np.zeros(cfg.num_classes))

    @property
    def l2_rate(self) -> float:
        return self.config.l2

    def regularized(self):
        names = [f"conv{i}.kernel" for i in (1, 2)]
        names += [f"lstm{i}.{m}" for i in (1, 2) for m in ("W", "U")]
        return [self.params[n] for n in names]

    def buffers(self):
        out = {}
        for i, st in enumerate(self.bn_states, 1):
            out[f"bn{i}.running_mean"] = st.running_mean
            out[f"bn{i}.running_var"] = st.running_var
            out[f"bn{i}.initialized"] = np.array([float(st.initialized)])
        return out

    def load_buffers(self, bufs):
        for i, st in enumerate(self.bn_states, 1):
            st.running_mean = np.array(bufs[f"bn{i}.running_mean"], dtype=np.float64)
            st.running_var = np.array(bufs[f"bn{i}.running_var"], dtype=np.float64)
            st.initialized = bool(bufs[f"bn{i}.initialized"][0])

    def forward(self, x, mode: str = "eval") -> E.Tensor:
        cfg = self.config
        x = E.as_tensor(x)
        if x.ndim != 3 or x.shape[1:] != (cfg.length, cfg.channels):
            raise ShapeMismatch(f"expected [B, {cfg.length}, {cfg.channels}], got {x.shape}")
        p = self.params
        h = x
        for i in (1, 2):
            h = E.conv1d(h, p[f"conv{i}.kernel"], p[f"conv{i}.bias"], 1, cfg.padding)
            if cfg.conv_activation == "relu":
                h = E.relu(h)
            h = E.batchnorm1d(h, p[f"bn{i}.gamma"], p[f"bn{i}.beta"], self.bn_states[i - 1],
                              mode, cfg.bn_momentum, cfg.bn_eps)
            h = E.maxpool1d(h, cfg.pool_window, cfg.pool_stride)
            h = E.dropout(h, cfg.dropout, mode, self.rng)
        for i in (1, 2):
            h = E.lstm_layer(h, p[f"lstm{i}.W"], p[f"lstm{i}.U"], p[f"lstm{i}.b"], return_sequences=True)
        h = E.reshape(h, (h.shape[0], -1))
        if cfg.dense_hidden:
            h = E.dense(h, p["dense1.W"], p["dense1.b"], "relu")
            h = E.dropout(h, cfg.dropout, mode, self.rng)
        return E.dense(h, p["out.W"], p["out.b"], "softmax")


def cnn_lstm_forward(cfg: CnnLstmConfig, model: CnnLstm, x, mode: str = "eval") -> E.Tensor:
    if model.config != cfg:
        raise ShapeMismatch("model was built with a different config")
    return model.forward(x, mode)
