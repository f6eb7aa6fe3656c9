"""Error metrics and the epoch-scheduled fused training loss.

The training loss blends an absolute squared error with a squared relative
error, weighted by a schedule value that drops once late in training:

    L = (1/T) * sum_t [ lam * e_t^2 + (1 - lam) * e_t^2 / x_t^2 ]

with e_t = pred_t - truth_t. Early epochs (large lam) favour the large
stress peaks; late epochs (small lam) sharpen the small values near zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError

# Relative-error denominators are floored here so gradients stay bounded
# when normalized targets come arbitrarily close to zero.
REL_DENOM_FLOOR = 1e-8


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"series lengths differ: {pred.shape} vs {truth.shape}")
    if pred.size < 1:
        raise ShapeError("series must have length >= 1")
    return pred, truth


def mape(pred, truth) -> float:
    """Mean absolute percentage error; truth must be strictly positive."""
    pred, truth = _pair(pred, truth)
    if np.any(truth <= 0.0):
        raise DomainError("mape needs strictly positive truth values")
    return float(np.mean(np.abs(pred - truth) / truth))


def mape_floored(pred, truth, floor: float = REL_DENOM_FLOOR) -> float:
    """MAPE variant with floored denominators, for reporting on normalized
    series whose minimum maps to exactly zero."""
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth) / np.maximum(truth, floor)))


def mape_gradient(pred, truth) -> np.ndarray:
    """Subgradient of mape w.r.t. pred (sign convention: 0 at equality)."""
    pred, truth = _pair(pred, truth)
    if np.any(truth <= 0.0):
        raise DomainError("mape needs strictly positive truth values")
    return np.sign(pred - truth) / (truth * pred.size)


def mse(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    err = pred - truth
    return float(np.mean(err * err))


def mse_gradient(pred, truth) -> np.ndarray:
    pred, truth = _pair(pred, truth)
    return 2.0 * (pred - truth) / pred.size


def msre(pred, truth, floor: float = REL_DENOM_FLOOR) -> float:
    """Mean squared relative error with the shared denominator floor.

    Computed as err^2 * (1/denom^2) in that exact order, matching the
    relative term inside dynamic_loss bit for bit.
    """
    pred, truth = _pair(pred, truth)
    err = pred - truth
    denom = np.maximum(truth, floor)
    inv_sq = 1.0 / (denom * denom)
    return float(np.mean(err * err * inv_sq))


@dataclass(frozen=True)
class LossSchedule:
    """Epoch-indexed weight for the fused loss: high early, low late."""

    lambda_high: float = 0.9
    lambda_low: float = 0.1
    switch_epoch: int = 600
    total_epochs: int = 1800

    def __post_init__(self):
        if not 0.0 <= self.lambda_low <= self.lambda_high <= 1.0:
            raise DomainError("need 0 <= lambda_low <= lambda_high <= 1")
        if not 1 <= self.switch_epoch <= self.total_epochs:
            raise DomainError("need 1 <= switch_epoch <= total_epochs")


def lambda_at(epoch: int, schedule: LossSchedule) -> float:
    """Schedule weight for a 1-based epoch; the switch epoch itself still
    uses the high value."""
    if not 1 <= epoch <= schedule.total_epochs:
        raise DomainError(
            f"epoch {epoch} outside [1, {schedule.total_epochs}]")
    return schedule.lambda_high if epoch <= schedule.switch_epoch else schedule.lambda_low


def dynamic_loss(pred, truth, epoch: int, schedule: LossSchedule):
    """Fused loss value and its gradient w.r.t. pred.

    Truth values must be strictly positive. Denominators of the relative
    term are floored at REL_DENOM_FLOOR.
    """
    pred, truth = _pair(pred, truth)
    if np.any(truth <= 0.0):
        raise DomainError("dynamic loss needs strictly positive truth values")
    lam = lambda_at(epoch, schedule)
    err = pred - truth
    denom = np.maximum(truth, REL_DENOM_FLOOR)
    inv_sq = 1.0 / (denom * denom)
    value = float(np.mean(lam * err * err + (1.0 - lam) * err * err * inv_sq))
    grad = (2.0 / pred.size) * (lam + (1.0 - lam) * inv_sq) * err
    return value, grad
