"""The two-branch surrogate network.

One instance predicts the next-step maximum internal stress of a single
channel (xx or yy) from a window of past stress values plus the matching
window of downsampled binary damage frames:

    stress window (delta_t,) --> BiLSTM ----------------------\
                                                               concat per
    damage window (h, w, delta_t) --> conv/pool blocks --> FC  step
                                      --> BiLSTM -------------/
                                                               |
                             fusion BiLSTM --> last step --> FC + sigmoid

All convolutions are valid (no padding) and per-time-channel, so the damage
branch preserves temporal alignment until the recurrent layers. The two
channels use two fully independent model instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import checkpoint as ckpt
from .errors import CheckpointError, DomainError, ShapeError, StaleCacheError
from .layers import BiLSTM, FullyConnected, MaxPool, SigmoidHead, TIConv
from .params import ParamStore
from .rng import SplitMix64, derive_seed

CHANNELS = ("xx", "yy")


@dataclass(frozen=True)
class StressNetConfig:
    delta_t: int = 10
    feature_dim: int = 32
    conv_blocks: tuple = ((5, 2), (3, 2))
    lstm_hidden: int = 32
    frame_shape: tuple = (24, 16)

    def __post_init__(self):
        if self.delta_t < 1 or self.feature_dim < 1 or self.lstm_hidden < 1:
            raise ShapeError("delta_t, feature_dim and lstm_hidden must be >= 1")
        object.__setattr__(self, "conv_blocks",
                           tuple((int(d), int(p)) for d, p in self.conv_blocks))
        object.__setattr__(self, "frame_shape",
                           tuple(int(v) for v in self.frame_shape))
        self.cnn_output_shape()  # validates every intermediate extent

    def cnn_output_shape(self) -> tuple:
        """Spatial extent left after all conv/pool blocks."""
        h, w = self.frame_shape
        for d, p in self.conv_blocks:
            h, w = h - d + 1, w - d + 1
            if h < 1 or w < 1:
                raise ShapeError(f"conv kernel {d} exhausts spatial extent")
            if p < 1 or h % p or w % p:
                raise ShapeError(f"pool size {p} does not divide {h}x{w}")
            h, w = h // p, w // p
        return h, w

    def to_dict(self) -> dict:
        return {
            "delta_t": self.delta_t,
            "feature_dim": self.feature_dim,
            "conv_blocks": [list(b) for b in self.conv_blocks],
            "lstm_hidden": self.lstm_hidden,
            "frame_shape": list(self.frame_shape),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StressNetConfig":
        return cls(
            delta_t=d["delta_t"],
            feature_dim=d["feature_dim"],
            conv_blocks=tuple(tuple(b) for b in d["conv_blocks"]),
            lstm_hidden=d["lstm_hidden"],
            frame_shape=tuple(d["frame_shape"]),
        )


@dataclass
class ModelCache:
    """Handle tying one backward call to its forward pass; carries the
    intermediate branch activations the structural tests inspect."""

    token: object
    stress_feat: np.ndarray      # (B, D, dt) left branch output
    cnn_out: np.ndarray          # (B, D, dt) damage branch before its BiLSTM
    damage_feat: np.ndarray      # (B, D, dt) damage branch after its BiLSTM
    fused: np.ndarray = field(repr=False, default=None)


class StressNet:
    """Assembled network for one stress channel."""

    uses_damage = True
    arch = "stressnet"

    def __init__(self, config: StressNetConfig, channel: str = "xx",
                 seed: int = 0, loss_name: str = "dynamic"):
        if channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}")
        self.config = config
        self.channel = channel
        self.seed = seed
        self.loss_name = loss_name
        rng = SplitMix64(derive_seed(seed, f"stressnet-init-{channel}"))
        d_feat = config.feature_dim
        hid = config.lstm_hidden
        self.store = ParamStore()

        self.stress_rnn = BiLSTM(1, hid, d_feat, "identity", rng)
        self.store.adopt("stress_rnn", self.stress_rnn)

        self.cnn_layers = []
        for i, (d, p) in enumerate(config.conv_blocks):
            conv = TIConv(d, config.delta_t, rng)
            pool = MaxPool(p)
            self.cnn_layers.append(conv)
            self.cnn_layers.append(pool)
            self.store.adopt(f"cnn.conv{i}", conv)
        h, w = config.cnn_output_shape()
        self.cnn_fc = FullyConnected(d_feat, h * w, rng)
        self.store.adopt("cnn.fc", self.cnn_fc)

        self.damage_rnn = BiLSTM(d_feat, hid, d_feat, "identity", rng)
        self.store.adopt("damage_rnn", self.damage_rnn)

        self.fusion_rnn = BiLSTM(2 * d_feat, hid, d_feat, "identity", rng)
        self.store.adopt("fusion_rnn", self.fusion_rnn)

        self.head = SigmoidHead(d_feat, rng)
        self.store.adopt("head", self.head)

        self._live = None

    @property
    def delta_t(self) -> int:
        return self.config.delta_t

    def _check_inputs(self, stress, damage):
        dt = self.config.delta_t
        h, w = self.config.frame_shape
        if stress.ndim != 2 or stress.shape[1] != dt:
            raise ShapeError(f"stress window must be (batch, {dt})")
        if damage.shape != (stress.shape[0], h, w, dt):
            raise ShapeError(
                f"damage window must be (batch, {h}, {w}, {dt}), got {damage.shape}")
        if np.any(stress < 0.0) or np.any(stress > 1.0):
            raise DomainError("stress window values must lie in [0, 1]")
        if not np.all((damage == 0.0) | (damage == 1.0)):
            raise DomainError("damage values must be binary")

    def forward(self, stress: np.ndarray, damage: np.ndarray):
        """Batched forward: stress (B, dt), damage (B, h, w, dt) -> (B,)."""
        stress = np.ascontiguousarray(stress, dtype=np.float64)
        damage = np.ascontiguousarray(damage, dtype=np.float64)
        self._check_inputs(stress, damage)

        stress_feat = self.stress_rnn.forward(stress[:, None, :])

        z = damage
        for layer in self.cnn_layers:
            z = layer.forward(z)
        cnn_out = self.cnn_fc.forward(z)
        damage_feat = self.damage_rnn.forward(cnn_out)

        fused = np.concatenate([stress_feat, damage_feat], axis=1)
        fusion_out = self.fusion_rnn.forward(np.ascontiguousarray(fused))
        pred = self.head.forward(fusion_out[:, :, -1])

        cache = ModelCache(object(), stress_feat, cnn_out, damage_feat)
        self._live = (cache.token, fusion_out.shape)
        return pred, cache

    def backward(self, cache: ModelCache, d_pred: np.ndarray) -> None:
        """Accumulate parameter gradients; input gradients are discarded."""
        if self._live is None or cache.token is not self._live[0]:
            raise StaleCacheError("model backward without matching forward")
        token, fo_shape = self._live
        self._live = None
        d_pred = np.asarray(d_pred, dtype=np.float64)

        d_last = self.head.backward(d_pred)
        d_fusion = np.zeros(fo_shape)
        d_fusion[:, :, -1] = d_last
        d_fused = self.fusion_rnn.backward(d_fusion)

        d_feat = self.config.feature_dim
        d_stress_feat = d_fused[:, :d_feat, :]
        d_damage_feat = np.ascontiguousarray(d_fused[:, d_feat:, :])

        d_cnn = self.damage_rnn.backward(d_damage_feat)
        dz = self.cnn_fc.backward(d_cnn)
        for layer in reversed(self.cnn_layers):
            dz = layer.backward(dz)

        self.stress_rnn.backward(np.ascontiguousarray(d_stress_feat))

    def forward_one(self, stress_window: np.ndarray, damage_window: np.ndarray):
        """Single-sample forward: (dt,) and (h, w, dt) -> float prediction."""
        stress = np.asarray(stress_window, dtype=np.float64)
        if stress.ndim != 1:
            raise ShapeError("stress window must be one-dimensional")
        damage = np.asarray(damage_window, dtype=np.float64)
        pred, cache = self.forward(stress[None], damage[None])
        return float(pred[0]), cache

    # -- persistence -------------------------------------------------------

    def config_dict(self, norm: dict | None = None, display: str | None = None) -> dict:
        return {
            "model": self.config.to_dict(),
            "channel": self.channel,
            "loss": self.loss_name,
            "display": display or default_display_name(self.arch, self.loss_name),
            "norm": norm,
        }


def default_display_name(arch: str, loss_name: str = "dynamic") -> str:
    if arch == "stressnet":
        label = {"dynamic": "Dynamic Loss", "mse": "MSE", "mape": "MAPE"}[loss_name]
        return f"StressNet({label})"
    return {"lstm": "LSTM", "bilstm": "Bi-LSTM",
            "historical_average": "Historical Average"}[arch]


def save_checkpoint(model: StressNet, path, norm: dict | None = None) -> None:
    ckpt.write_container(
        path, model.arch, model.config_dict(norm),
        [(name, p.value) for name, p in model.store.items()])


def load_checkpoint(path, config: StressNetConfig | None = None) -> StressNet:
    """Rebuild a model from a checkpoint.

    If ``config`` is given it must match the stored one exactly; this is the
    guard against resuming into a runtime with different window sizes.
    """
    arch, meta, params = ckpt.read_container(path)
    if arch != "stressnet":
        raise CheckpointError(f"expected a stressnet checkpoint, found {arch}")
    stored = StressNetConfig.from_dict(meta["model"])
    if config is not None and config != stored:
        raise ShapeError(
            f"checkpoint config {stored} does not match runtime config {config}")
    model = StressNet(stored, channel=meta["channel"],
                      loss_name=meta.get("loss", "dynamic"))
    _load_params(model.store, params)
    model.norm = meta.get("norm")
    model.display = meta.get("display", default_display_name(arch))
    return model


def _load_params(store: ParamStore, params: dict) -> None:
    expected = set(store.names())
    if set(params) != expected:
        missing = expected - set(params)
        extra = set(params) - expected
        raise CheckpointError(
            f"parameter names do not match (missing={sorted(missing)}, "
            f"extra={sorted(extra)})")
    for name, arr in params.items():
        p = store[name]
        if arr.shape != p.value.shape:
            raise ShapeError(
                f"parameter {name}: stored shape {arr.shape} != {p.value.shape}")
        p.value[...] = arr
