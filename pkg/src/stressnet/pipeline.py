"""Preprocessing: frame downsampling, min-max normalization, window
construction and train/test splitting.

Raw 192 x 128 damage frames are reduced to 24 x 16 by 8 x 8 blockwise max,
which keeps any crack pixel alive. Stress series are min-max normalized
with statistics taken from the training partition only (pass
``paper_faithful=True`` to compute them over every simulation instead,
which leaks test statistics but matches the published protocol).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError, ShapeError
from .rng import SplitMix64
from .simulate import SimulationRecord, list_sim_dirs, load_record

DOWNSAMPLE_FACTOR = 8
CACHE_MAGIC = b"SNDS0001"


def downsample_frame(frame: np.ndarray) -> np.ndarray:
    """8 x 8 blockwise max of one 192 x 128 binary frame -> 24 x 16 uint8."""
    frame = np.asarray(frame)
    if frame.ndim != 2 or frame.shape[0] % DOWNSAMPLE_FACTOR or frame.shape[1] % DOWNSAMPLE_FACTOR:
        raise ShapeError(f"frame shape {frame.shape} not divisible by 8x8 blocks")
    h, w = frame.shape
    d = DOWNSAMPLE_FACTOR
    blocks = frame.reshape(h // d, d, w // d, d)
    return blocks.max(axis=(1, 3)).astype(np.uint8)


def downsample_stack(frames: np.ndarray) -> np.ndarray:
    """(T, 192, 128) -> (24, 16, T) float64, ready for the damage branch."""
    t = frames.shape[0]
    out = np.zeros((frames.shape[1] // DOWNSAMPLE_FACTOR,
                    frames.shape[2] // DOWNSAMPLE_FACTOR, t))
    for i in range(t):
        out[:, :, i] = downsample_frame(frames[i])
    return out


@dataclass(frozen=True)
class NormalizationStats:
    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise DomainError("x_max must exceed x_min")

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(float(d["x_min"]), float(d["x_max"]))


def normalize(x, stats: NormalizationStats):
    return (np.asarray(x, dtype=np.float64) - stats.x_min) / (stats.x_max - stats.x_min)


def denormalize(x, stats: NormalizationStats):
    return np.asarray(x, dtype=np.float64) * (stats.x_max - stats.x_min) + stats.x_min


def compute_stats(series_list) -> NormalizationStats:
    lo = min(float(np.min(s)) for s in series_list)
    hi = max(float(np.max(s)) for s in series_list)
    return NormalizationStats(lo, hi)


@dataclass
class PreparedSim:
    """One simulation as the model consumes it."""

    sim_id: str
    stress_raw: dict            # channel -> (T,) raw Pa
    frames: np.ndarray          # (24, 16, T) float64 in {0, 1}

    @property
    def n_steps(self) -> int:
        return self.frames.shape[2]


def prepare_record(record: SimulationRecord, sim_id: str | None = None) -> PreparedSim:
    if record.frames is None:
        raise DataError("record was loaded without frames")
    return PreparedSim(
        sim_id=sim_id or f"seed{record.seed}",
        stress_raw={"xx": record.stress_xx.copy(), "yy": record.stress_yy.copy()},
        frames=downsample_stack(record.frames),
    )


@dataclass(frozen=True)
class WindowSample:
    stress_window: np.ndarray   # (delta_t,) normalized, in [0, 1]
    damage_window: np.ndarray   # (24, 16, delta_t) binary
    target: float               # normalized stress at the step after the window


def make_training_windows(stress_norm: np.ndarray, frames: np.ndarray,
                          delta_t: int) -> list[WindowSample]:
    """All T - delta_t teacher-forced samples of one simulation."""
    t_steps = stress_norm.shape[0]
    if frames.shape[2] != t_steps:
        raise ShapeError("stress series and frame stack disagree on length")
    if t_steps < delta_t + 1:
        raise ShapeError(
            f"record too short: {t_steps} steps < delta_t + 1 = {delta_t + 1}")
    out = []
    for k in range(t_steps - delta_t):
        out.append(WindowSample(
            stress_window=stress_norm[k:k + delta_t],
            damage_window=frames[:, :, k:k + delta_t],
            target=float(stress_norm[k + delta_t]),
        ))
    return out


@dataclass
class SplitPlan:
    """Fixed train-pool/test partition plus per-epoch validation sampling."""

    train_ids: list
    test_ids: list
    n_val_per_epoch: int

    def sample_validation(self, rng: SplitMix64):
        """Per-epoch draw: n_val sims go to validation, the rest train."""
        val = set(rng.sample(self.train_ids, self.n_val_per_epoch))
        train = [s for s in self.train_ids if s not in val]
        return train, [s for s in self.train_ids if s in val]

    def to_dict(self) -> dict:
        return {"train_ids": list(self.train_ids), "test_ids": list(self.test_ids),
                "n_val_per_epoch": self.n_val_per_epoch}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPlan":
        return cls(list(d["train_ids"]), list(d["test_ids"]),
                   int(d["n_val_per_epoch"]))


def split_dataset(sim_ids, n_train: int = 55, n_val_per_epoch: int = 6,
                  rng: SplitMix64 | None = None) -> SplitPlan:
    sim_ids = list(sim_ids)
    if len(sim_ids) <= n_train:
        raise DataError(
            f"need more than {n_train} simulations to split, have {len(sim_ids)}")
    if n_val_per_epoch >= n_train:
        raise DataError("validation draw must leave training simulations")
    order = list(sim_ids)
    if rng is not None:
        rng.shuffle(order)
    return SplitPlan(order[:n_train], order[n_train:], n_val_per_epoch)


# ---------------------------------------------------------------------------
# downsample cache: magic + T frames of 24*16 bytes, keyed by the hash of the
# simulation's meta.json
# ---------------------------------------------------------------------------

def write_frame_cache(path, frames: np.ndarray) -> None:
    """frames: (24, 16, T) in {0, 1}."""
    body = frames.transpose(2, 0, 1).astype(np.uint8).tobytes()
    Path(path).write_bytes(CACHE_MAGIC + body)


def read_frame_cache(path, n_steps: int, shape=(24, 16)) -> np.ndarray:
    buf = Path(path).read_bytes()
    if buf[:8] != CACHE_MAGIC:
        raise DataError(f"{path}: bad cache magic")
    body = buf[8:]
    expect = n_steps * shape[0] * shape[1]
    if len(body) != expect:
        raise DataError(f"{path}: cache holds {len(body)} bytes, expected {expect}")
    arr = np.frombuffer(body, dtype=np.uint8).reshape(n_steps, *shape)
    return arr.transpose(1, 2, 0).astype(np.float64)


def _meta_hash(sim_dir: Path) -> str:
    return hashlib.sha256((sim_dir / "meta.json").read_bytes()).hexdigest()[:12]


def prepare_sim_dir(sim_dir, cache_dir=None) -> PreparedSim:
    """Load one on-disk simulation, using/refreshing the downsample cache."""
    sim_dir = Path(sim_dir)
    meta = json.loads((sim_dir / "meta.json").read_text())
    n_steps = meta["n_steps"]
    ds_shape = (meta["config"]["rows"] // DOWNSAMPLE_FACTOR,
                meta["config"]["cols"] // DOWNSAMPLE_FACTOR)
    frames = None
    cache_path = None
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        cache_path = cache_dir / f"{sim_dir.name}.{_meta_hash(sim_dir)}.snds"
        if cache_path.exists():
            frames = read_frame_cache(cache_path, n_steps, shape=ds_shape)
    if frames is None:
        record = load_record(sim_dir, with_frames=True)
        frames = downsample_stack(record.frames)
        if cache_path is not None:
            write_frame_cache(cache_path, frames)
        rec_stress = {"xx": record.stress_xx, "yy": record.stress_yy}
    else:
        record = load_record(sim_dir, with_frames=False)
        rec_stress = {"xx": record.stress_xx, "yy": record.stress_yy}
    return PreparedSim(sim_id=sim_dir.name, stress_raw=rec_stress, frames=frames)


def prepare_dataset(root, cache_dir="auto") -> dict[str, PreparedSim]:
    """Load every sim_* directory under root, in name order."""
    root = Path(root)
    if cache_dir == "auto":
        cache_dir = root / "cache"
    out = {}
    for sim_dir in list_sim_dirs(root):
        out[sim_dir.name] = prepare_sim_dir(sim_dir, cache_dir)
    return out


def stats_for_split(prepared: dict, plan: SplitPlan, channel: str,
                    paper_faithful: bool = False) -> NormalizationStats:
    ids = (list(plan.train_ids) + list(plan.test_ids)) if paper_faithful else plan.train_ids
    return compute_stats([prepared[s].stress_raw[channel] for s in ids])
