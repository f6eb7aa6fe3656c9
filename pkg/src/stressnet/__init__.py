"""StressNet: surrogate prediction of maximum internal stress during
brittle fracture, with a synthetic fracture-data generator, baselines and
evaluation tooling."""

from ._kernels import backend_name
from .losses import LossSchedule, dynamic_loss, lambda_at, mape, mse
from .model import StressNet, StressNetConfig, load_checkpoint, save_checkpoint
from .pipeline import NormalizationStats, denormalize, downsample_frame, normalize
from .simulate import SimConfig, SimulationRecord, generate_dataset, run_simulation
from .tensor import Tensor
from .training import Adam, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "LossSchedule",
    "NormalizationStats",
    "SimConfig",
    "SimulationRecord",
    "StressNet",
    "StressNetConfig",
    "Tensor",
    "TrainConfig",
    "backend_name",
    "denormalize",
    "downsample_frame",
    "dynamic_loss",
    "generate_dataset",
    "lambda_at",
    "load_checkpoint",
    "mape",
    "mse",
    "normalize",
    "run_simulation",
    "save_checkpoint",
    "train",
]
