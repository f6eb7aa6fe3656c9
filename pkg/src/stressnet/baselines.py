"""Reference predictors: per-step historical average plus stress-only LSTM
and Bi-LSTM forecasters.

The recurrent baselines reuse the same cells, loss functions and training
loop as the main model; only the wiring differs (no damage input port, a
longer default window of 50 steps). That isolates the contribution of the
damage branch in the comparison table.
"""

from __future__ import annotations

import numpy as np

from . import checkpoint as ckpt
from .errors import CheckpointError, DataError, DomainError, ShapeError, StaleCacheError
from .layers import LSTM, BiLSTM, SigmoidHead
from .model import default_display_name
from .params import ParamStore
from .rng import SplitMix64, derive_seed

BASELINE_DELTA_T = 50


class HistoricalAverage:
    """Predicts the per-step mean of the normalized training series."""

    uses_damage = False
    arch = "historical_average"

    def __init__(self, mean_norm: np.ndarray, channel: str, delta_t: int = 10):
        self.mean_norm = np.asarray(mean_norm, dtype=np.float64)
        self.channel = channel
        self.delta_t = delta_t

    def predict(self, t: int) -> float:
        """Normalized prediction for 1-based step t."""
        if not 1 <= t <= self.mean_norm.shape[0]:
            raise DomainError(f"step {t} outside 1..{self.mean_norm.shape[0]}")
        return float(self.mean_norm[t - 1])


def fit_historical_average(stress_norm_list, channel: str,
                           delta_t: int = 10) -> HistoricalAverage:
    if not stress_norm_list:
        raise DataError("historical average needs at least one training series")
    lengths = {s.shape[0] for s in stress_norm_list}
    if len(lengths) != 1:
        raise ShapeError("training series must share one length")
    mean = np.mean(np.stack(stress_norm_list), axis=0)
    return HistoricalAverage(mean, channel, delta_t)


class _StressOnlyBase:
    """Shared plumbing for the window-in scalar-out recurrent baselines."""

    uses_damage = False

    def __init__(self, channel: str, delta_t: int, hidden: int, seed: int,
                 loss_name: str):
        if channel not in ("xx", "yy"):
            raise ValueError("channel must be xx or yy")
        self.channel = channel
        self.delta_t = delta_t
        self.hidden = hidden
        self.seed = seed
        self.loss_name = loss_name
        self.store = ParamStore()
        self._live = None

    def _check(self, stress):
        if stress.ndim != 2 or stress.shape[1] != self.delta_t:
            raise ShapeError(f"stress window must be (batch, {self.delta_t})")
        if np.any(stress < 0.0) or np.any(stress > 1.0):
            raise DomainError("stress window values must lie in [0, 1]")

    def forward_one(self, stress_window, damage_window=None):
        stress = np.asarray(stress_window, dtype=np.float64)
        pred, cache = self.forward(stress[None])
        return float(pred[0]), cache

    def config_dict(self, norm=None, display=None) -> dict:
        return {
            "model": {"delta_t": self.delta_t, "hidden": self.hidden},
            "channel": self.channel,
            "loss": self.loss_name,
            "display": display or default_display_name(self.arch),
            "norm": norm,
        }


class StressOnlyLSTM(_StressOnlyBase):
    """Unidirectional LSTM over the stress window; last hidden state feeds
    a sigmoid head."""

    arch = "lstm"

    def __init__(self, channel: str = "xx", delta_t: int = BASELINE_DELTA_T,
                 hidden: int = 32, seed: int = 0, loss_name: str = "mse"):
        super().__init__(channel, delta_t, hidden, seed, loss_name)
        rng = SplitMix64(derive_seed(seed, f"lstm-init-{channel}"))
        self.rnn = LSTM(1, hidden, rng)
        self.store.adopt("rnn", self.rnn)
        self.head = SigmoidHead(hidden, rng)
        self.store.adopt("head", self.head)

    def forward(self, stress: np.ndarray, damage=None):
        stress = np.ascontiguousarray(stress, dtype=np.float64)
        self._check(stress)
        h_seq = self.rnn.forward(stress[:, None, :])
        pred = self.head.forward(h_seq[:, :, -1])
        token = object()
        self._live = (token, h_seq.shape)
        return pred, token

    def backward(self, cache, d_pred) -> None:
        if self._live is None or cache is not self._live[0]:
            raise StaleCacheError("baseline backward without matching forward")
        _, h_shape = self._live
        self._live = None
        d_last = self.head.backward(np.asarray(d_pred, dtype=np.float64))
        dh = np.zeros(h_shape)
        dh[:, :, -1] = d_last
        self.rnn.backward(dh)


class StressOnlyBiLSTM(_StressOnlyBase):
    """Bidirectional encoder over the stress window; the last combined step
    feeds a sigmoid head."""

    arch = "bilstm"

    def __init__(self, channel: str = "xx", delta_t: int = BASELINE_DELTA_T,
                 hidden: int = 32, seed: int = 0, loss_name: str = "mse"):
        super().__init__(channel, delta_t, hidden, seed, loss_name)
        rng = SplitMix64(derive_seed(seed, f"bilstm-init-{channel}"))
        self.rnn = BiLSTM(1, hidden, hidden, "identity", rng)
        self.store.adopt("rnn", self.rnn)
        self.head = SigmoidHead(hidden, rng)
        self.store.adopt("head", self.head)

    def forward(self, stress: np.ndarray, damage=None):
        stress = np.ascontiguousarray(stress, dtype=np.float64)
        self._check(stress)
        out = self.rnn.forward(stress[:, None, :])
        pred = self.head.forward(out[:, :, -1])
        token = object()
        self._live = (token, out.shape)
        return pred, token

    def backward(self, cache, d_pred) -> None:
        if self._live is None or cache is not self._live[0]:
            raise StaleCacheError("baseline backward without matching forward")
        _, out_shape = self._live
        self._live = None
        d_last = self.head.backward(np.asarray(d_pred, dtype=np.float64))
        dout = np.zeros(out_shape)
        dout[:, :, -1] = d_last
        self.rnn.backward(dout)


# -- persistence -------------------------------------------------------------

def save_baseline(model, path, norm: dict | None = None) -> None:
    if isinstance(model, HistoricalAverage):
        config = {
            "model": {"delta_t": model.delta_t, "n_steps": int(model.mean_norm.shape[0])},
            "channel": model.channel,
            "loss": "none",
            "display": default_display_name(model.arch),
            "norm": norm,
        }
        ckpt.write_container(path, model.arch, config,
                             [("mean_norm", model.mean_norm)])
        return
    ckpt.write_container(path, model.arch, model.config_dict(norm),
                         [(name, p.value) for name, p in model.store.items()])


def load_baseline(path):
    arch, meta, params = ckpt.read_container(path)
    if arch == "historical_average":
        model = HistoricalAverage(params["mean_norm"], meta["channel"],
                                  meta["model"]["delta_t"])
    elif arch == "lstm":
        model = StressOnlyLSTM(meta["channel"], meta["model"]["delta_t"],
                               meta["model"]["hidden"], loss_name=meta["loss"])
        _fill(model.store, params)
    elif arch == "bilstm":
        model = StressOnlyBiLSTM(meta["channel"], meta["model"]["delta_t"],
                                 meta["model"]["hidden"], loss_name=meta["loss"])
        _fill(model.store, params)
    else:
        raise CheckpointError(f"not a baseline checkpoint: {arch}")
    model.norm = meta.get("norm")
    model.display = meta.get("display", default_display_name(arch))
    return model


def _fill(store: ParamStore, params: dict) -> None:
    if set(params) != set(store.names()):
        raise CheckpointError("parameter names do not match the architecture")
    for name, arr in params.items():
        p = store[name]
        if arr.shape != p.value.shape:
            raise ShapeError(f"parameter {name}: shape {arr.shape} != {p.value.shape}")
        p.value[...] = arr
