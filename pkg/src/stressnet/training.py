"""Adam training loop with epoch-level shuffling, per-epoch validation
resampling, the scheduled loss switch, and best-checkpoint retention.

One epoch walks every window of the epoch's training simulations once,
teacher-forced (true stress history in, one-step prediction out). The
simulation feeding order reshuffles every ``epochs_per_shuffle`` epochs and
a fresh validation subset is drawn each epoch; both streams are independent
deterministic functions of the config seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError, NumericError
from .losses import (LossSchedule, REL_DENOM_FLOOR, dynamic_loss, lambda_at,
                     mape, mape_gradient, mse, mse_gradient)
from .params import ParamStore
from .pipeline import NormalizationStats, PreparedSim, SplitPlan, denormalize, normalize
from .rng import SplitMix64, derive_seed

LOSS_KINDS = ("dynamic", "mse", "mape")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs_per_shuffle: int = 30
    n_shuffles: int = 60
    n_val_per_epoch: int = 6
    seed: int = 0
    lambda_high: float = 0.9
    lambda_low: float = 0.1
    switch_epoch: int = 600
    loss: str = "dynamic"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}")

    @property
    def total_epochs(self) -> int:
        return self.epochs_per_shuffle * self.n_shuffles

    def schedule(self) -> LossSchedule:
        return LossSchedule(self.lambda_high, self.lambda_low,
                            self.switch_epoch, self.total_epochs)

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """Laptop-scale preset: 2 shuffles x 30 epochs, switch at 1/3."""
        base = cls(n_shuffles=2, switch_epoch=20)
        return replace(base, **overrides)

    @classmethod
    def paper_scale(cls, **overrides) -> "TrainConfig":
        """Full protocol: 60 shuffles x 30 epochs = 1800, switch at 600."""
        base = cls()
        return replace(base, **overrides)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class Adam:
    """Standard Adam with bias correction over a ParamStore."""

    def __init__(self, store: ParamStore, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.value) for name, p in store.items()}
        self.v = {name: np.zeros_like(p.value) for name, p in store.items()}

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.store.items():
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass
class EpochStats:
    epoch: int
    lam: float
    train_loss: float
    val_mape: float


@dataclass
class TrainHistory:
    rows: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_mape: float = float("inf")

    def to_csv(self, path) -> None:
        lines = ["epoch,lambda,train_loss,val_mape"]
        for r in self.rows:
            lines.append(f"{r.epoch},{float(r.lam)!r},"
                         f"{float(r.train_loss)!r},{float(r.val_mape)!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def _loss_and_grad(kind: str, preds, targets, epoch, schedule):
    if kind == "dynamic":
        return dynamic_loss(preds, targets, epoch, schedule)
    if kind == "mse":
        return mse(preds, targets), mse_gradient(preds, targets)
    return mape(preds, targets), mape_gradient(preds, targets)


def _gather_batch(sims, stress_norm, targets_norm, items, delta_t, uses_damage):
    stress = np.stack([stress_norm[s][k:k + delta_t] for s, k in items])
    targets = np.array([targets_norm[s][k + delta_t] for s, k in items])
    damage = None
    if uses_damage:
        damage = np.stack([sims[s].frames[:, :, k:k + delta_t] for s, k in items])
    return stress, targets, damage


def one_step_predictions(model, sim: PreparedSim, stress_norm: np.ndarray,
                         chunk: int = 64) -> np.ndarray:
    """Teacher-forced predictions for every window of one simulation."""
    delta_t = model.delta_t
    n = sim.n_steps - delta_t
    preds = np.zeros(n)
    for start in range(0, n, chunk):
        ks = range(start, min(start + chunk, n))
        stress = np.stack([stress_norm[k:k + delta_t] for k in ks])
        damage = None
        if model.uses_damage:
            damage = np.stack([sim.frames[:, :, k:k + delta_t] for k in ks])
            out, _ = model.forward(stress, damage)
        else:
            out, _ = model.forward(stress)
        preds[start:start + len(out)] = out
    return preds


def validation_mape(model, sims, stress_norm, val_ids, stats: NormalizationStats) -> float:
    """Mean raw-scale one-step MAPE over the given simulations."""
    scores = []
    for sid in val_ids:
        preds = one_step_predictions(model, sims[sid], stress_norm[sid])
        truth_raw = sims[sid].stress_raw[model.channel]
        scores.append(mape(denormalize(preds, stats), truth_raw[model.delta_t:]))
    return float(np.mean(scores))


def train(model, sims: dict, plan: SplitPlan, stats: NormalizationStats,
          config: TrainConfig) -> TrainHistory:
    """Train ``model`` in place; returns the history. The model ends at the
    best-validation parameters seen."""
    if not plan.train_ids:
        raise DataError("empty training split")
    channel = model.channel
    delta_t = model.delta_t
    schedule = config.schedule()

    # normalized series, fixed for the whole run
    stress_norm = {sid: normalize(sims[sid].stress_raw[channel], stats)
                   for sid in plan.train_ids}
    # loss denominators must stay positive: the global minimum of the
    # training partition normalizes to exactly zero
    targets_norm = {sid: np.maximum(s, REL_DENOM_FLOOR)
                    for sid, s in stress_norm.items()}

    adam = Adam(model.store, config.learning_rate, config.beta1,
                config.beta2, config.eps)
    rng_order = SplitMix64(derive_seed(config.seed, "sim-order"))
    rng_val = SplitMix64(derive_seed(config.seed, "validation"))
    order = list(plan.train_ids)

    history = TrainHistory()
    best_snapshot = None
    for epoch in range(1, config.total_epochs + 1):
        if (epoch - 1) % config.epochs_per_shuffle == 0:
            rng_order.shuffle(order)
        train_ids, val_ids = _epoch_split(order, rng_val, config.n_val_per_epoch)
        lam = lambda_at(epoch, schedule)

        items = [(sid, k) for sid in train_ids
                 for k in range(sims[sid].n_steps - delta_t)]
        loss_sum = 0.0
        for start in range(0, len(items), config.batch_size):
            batch = items[start:start + config.batch_size]
            stress, targets, damage = _gather_batch(
                sims, stress_norm, targets_norm, batch, delta_t, model.uses_damage)
            if model.uses_damage:
                preds, cache = model.forward(stress, damage)
            else:
                preds, cache = model.forward(stress)
            loss, dpred = _loss_and_grad(config.loss, preds, targets,
                                         epoch, schedule)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}")
            model.store.zero_grads()
            model.backward(cache, dpred)
            adam.step()
            loss_sum += loss * len(batch)

        train_loss = loss_sum / len(items)
        val_mape = validation_mape(model, sims, stress_norm,
                                   val_ids or train_ids, stats)
        history.rows.append(EpochStats(epoch, lam, train_loss, val_mape))
        if val_mape < history.best_val_mape:
            history.best_val_mape = val_mape
            history.best_epoch = epoch
            best_snapshot = model.store.snapshot()

    if best_snapshot is not None:
        model.store.restore(best_snapshot)
    return history


def _epoch_split(order, rng_val, n_val):
    if n_val <= 0 or n_val >= len(order):
        return list(order), []
    val = set(rng_val.sample(order, n_val))
    return [s for s in order if s not in val], [s for s in order if s in val]


def write_train_config(path, config: TrainConfig, extra: dict | None = None) -> None:
    blob = {"train": config.to_dict()}
    if extra:
        blob.update(extra)
    Path(path).write_text(json.dumps(blob, indent=1, sort_keys=True))
