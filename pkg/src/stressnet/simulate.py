"""Toy brittle-fracture generator.

Produces the same observable data a high-fidelity fracture code would hand
to the surrogate: a fixed-length sequence of binary damage frames plus two
fluctuating maximum-stress series, for a rectangular plate under a ramped
uniaxial tension.

The plate is 2 m wide by 3 m long on a 192 x 128 pixel grid (square pixels,
15.625 mm each). Twenty 20 cm cracks are seeded in distinct 32 x 32 px cells
of a 6 x 4 placement grid, oriented 0, 60 or 120 degrees from horizontal.
Each step the applied load ramps linearly; a crack tip whose stress
intensity K = sigma * sqrt(pi * a) beats the toughness (with multiplicative
noise) extends one pixel along its orientation, occasionally kinking one
pixel sideways. A tip that runs into another crack dies and knocks the
carried load down by a random factor in [0.7, 0.9]. The plate fails at the
first step where damaged pixels form an 8-connected path across the full
width; damage then freezes and the reported stress decays geometrically.

The reported maximum stress is the applied load amplified by a tip
concentration factor 1 + 2*sqrt(a_max/rho) and dressed with multiplicative
noise; the transverse (xx) channel is a scaled-down copy of the load-axis
(yy) channel with independent noise.

Everything is driven by one SplitMix64 stream per simulation, so a record
is a pure function of (config, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError
from .rng import SplitMix64

_NEIGHBORS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class SimConfig:
    width_m: float = 2.0
    length_m: float = 3.0
    rows: int = 192
    cols: int = 128
    cell_px: int = 32
    n_initial_cracks: int = 20
    crack_length_m: float = 0.20
    orientations_deg: tuple = (0.0, 60.0, 120.0)
    n_steps: int = 228
    toughness: float = 2.4e6          # Pa*sqrt(m); math.inf freezes growth
    load_rate: float = 5.0e4          # Pa per step
    tip_radius_px: float = 2.0
    fluctuation: float = 0.06         # multiplicative reported-stress noise
    growth_noise: float = 0.2         # multiplicative noise on K per tip
    kink_prob: float = 0.2
    coalescence_drop: tuple = (0.7, 0.9)
    post_failure_decay: float = 0.95
    xx_scale: float = 0.35

    def __post_init__(self):
        if self.rows % self.cell_px or self.cols % self.cell_px:
            raise ShapeError("cell size must divide the grid")
        if abs(self.pitch_m - self.length_m / self.rows) > 1e-12:
            raise ShapeError("pixels must be square")
        if self.n_initial_cracks > self.n_cells:
            raise ShapeError("more cracks than placement cells")
        if self.n_steps < 1:
            raise ShapeError("need at least one step")

    @property
    def pitch_m(self) -> float:
        return self.width_m / self.cols

    @property
    def cell_grid(self) -> tuple:
        return self.rows // self.cell_px, self.cols // self.cell_px

    @property
    def n_cells(self) -> int:
        gr, gc = self.cell_grid
        return gr * gc

    @property
    def crack_length_px(self) -> int:
        return int(math.floor(self.crack_length_m / self.pitch_m + 0.5))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        d["orientations_deg"] = tuple(d["orientations_deg"])
        d["coalescence_drop"] = tuple(d["coalescence_drop"])
        if d.get("toughness") is None:  # JSON cannot carry infinity
            d["toughness"] = math.inf
        return cls(**d)


@dataclass
class SimulationRecord:
    seed: int
    config: SimConfig
    frames: np.ndarray            # (T, rows, cols) bool, monotone in t
    stress_xx: np.ndarray         # (T,) raw Pa
    stress_yy: np.ndarray         # (T,) raw Pa
    failure_step: int | None      # 1-based step of first spanning crack
    cracks: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return self.frames.shape[0]


def _round_px(x: float) -> int:
    # floor(x + 0.5): portable half-up rounding, no banker's ties
    return int(math.floor(x + 0.5))


class _UnionFind:
    """Incremental 8-connectivity over damaged pixels with per-root column
    extents, so spanning is detected the step it first appears."""

    def __init__(self, rows: int, cols: int):
        self.cols = cols
        self.parent = np.full(rows * cols, -1, dtype=np.int64)
        self.size = np.zeros(rows * cols, dtype=np.int64)
        self.min_col = np.zeros(rows * cols, dtype=np.int64)
        self.max_col = np.zeros(rows * cols, dtype=np.int64)
        self.spanning = False

    def _find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:  # path compression
            self.parent[i], i = root, self.parent[i]
        return root

    def add(self, r: int, c: int) -> None:
        i = r * self.cols + c
        self.parent[i] = i
        self.size[i] = 1
        self.min_col[i] = c
        self.max_col[i] = c

    def union(self, a: int, b: int) -> None:
        ra, rb = self._find(a), self._find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.min_col[ra] = min(self.min_col[ra], self.min_col[rb])
        self.max_col[ra] = max(self.max_col[ra], self.max_col[rb])
        if self.min_col[ra] == 0 and self.max_col[ra] == self.cols - 1:
            self.spanning = True

    def connect_neighbors(self, r: int, c: int, damage: np.ndarray) -> None:
        i = r * self.cols + c
        rows = damage.shape[0]
        for dr, dc in _NEIGHBORS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < self.cols and damage[rr, cc]:
                self.union(i, rr * self.cols + cc)
        # a lone pixel on a boundary column can itself complete a span only
        # on a 1-px-wide grid; still keep the invariant exact
        ri = self._find(i)
        if self.min_col[ri] == 0 and self.max_col[ri] == self.cols - 1:
            self.spanning = True


class _Tip:
    __slots__ = ("pos", "direction", "alive")

    def __init__(self, pos, direction):
        self.pos = list(pos)          # float (row, col)
        self.direction = direction    # unit (drow, dcol)
        self.alive = True


class _Crack:
    __slots__ = ("index", "orientation_deg", "tips", "half_len_px", "n_pixels")

    def __init__(self, index, orientation_deg, center, half_len_px):
        theta = math.radians(orientation_deg)
        d = (math.sin(theta), math.cos(theta))
        self.index = index
        self.orientation_deg = orientation_deg
        self.tips = [_Tip(center, d), _Tip(center, (-d[0], -d[1]))]
        self.half_len_px = half_len_px
        self.n_pixels = 0


def _perp_offset(direction) -> tuple:
    dr, dc = direction
    off = (_round_px(-dc), _round_px(dr))
    if off == (0, 0):
        off = (1, 0)
    return off


class FractureSim:
    """Mutable simulation state; step() advances one load increment."""

    def __init__(self, config: SimConfig, seed: int):
        self.config = config
        self.seed = seed
        self.rng = SplitMix64(seed)
        self.damage = np.zeros((config.rows, config.cols), dtype=bool)
        self.owner = np.full((config.rows, config.cols), -1, dtype=np.int32)
        self.uf = _UnionFind(config.rows, config.cols)
        self.load_factor = 1.0
        self.failure_step: int | None = None
        self._fail_stress = None
        self.cracks = self._seed_cracks()

    # -- seeding -----------------------------------------------------------

    def _seed_cracks(self) -> list:
        cfg = self.config
        gr, gc = cfg.cell_grid
        cells = self.rng.sample([(r, c) for r in range(gr) for c in range(gc)],
                                cfg.n_initial_cracks)
        # tip-to-tip span equals the nominal pixel length; unit-spaced
        # samples along the segment give 12-14 distinct pixels per crack
        half = cfg.crack_length_px / 2.0
        cracks = []
        self._cells_meta = []
        for idx, (cr, cc) in enumerate(cells):
            # keep the whole crack >= 2 px inside its cell so components
            # never touch across cell borders
            margin = cfg.cell_px / 2.0 - half - 2.0
            r0 = cr * cfg.cell_px + cfg.cell_px / 2.0 + self.rng.uniform(-margin, margin)
            c0 = cc * cfg.cell_px + cfg.cell_px / 2.0 + self.rng.uniform(-margin, margin)
            theta_deg = self.rng.choice(cfg.orientations_deg)
            crack = _Crack(idx, theta_deg, (r0, c0), half)
            theta = math.radians(theta_deg)
            dr, dc = math.sin(theta), math.cos(theta)
            for k in range(cfg.crack_length_px + 1):
                s = k - half
                self._deposit(crack, _round_px(r0 + s * dr), _round_px(c0 + s * dc))
            crack.tips[0].pos = [r0 + half * dr, c0 + half * dc]
            crack.tips[1].pos = [r0 - half * dr, c0 - half * dc]
            cracks.append(crack)
            self._cells_meta.append({
                "cell": [cr, cc],
                "orientation_deg": float(theta_deg),
                "center": [r0, c0],
            })
        return cracks

    def _deposit(self, crack: _Crack, r: int, c: int) -> bool:
        """Mark one pixel damaged; returns True if a foreign crack was met."""
        cfg = self.config
        if not (0 <= r < cfg.rows and 0 <= c < cfg.cols):
            return False
        if self.damage[r, c]:
            return self.owner[r, c] != crack.index
        self.damage[r, c] = True
        self.owner[r, c] = crack.index
        crack.n_pixels += 1
        self.uf.add(r, c)
        met_foreign = False
        for dr, dc in _NEIGHBORS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < cfg.rows and 0 <= cc < cfg.cols and self.damage[rr, cc]:
                if self.owner[rr, cc] != crack.index:
                    met_foreign = True
                self.uf.union(r * cfg.cols + c, rr * cfg.cols + cc)
        return met_foreign

    # -- stepping ------------------------------------------------------------

    def step(self, t: int):
        """Advance to 1-based step t; returns (frame, sigma_xx, sigma_yy)."""
        cfg = self.config
        if not 1 <= t <= cfg.n_steps:
            raise ShapeError(f"step {t} outside 1..{cfg.n_steps}")
        if self.failure_step is None:
            self._grow(t)
            if self.uf.spanning:
                self.failure_step = t
        if self.failure_step is not None and self._fail_stress is not None:
            decay = cfg.post_failure_decay ** (t - self.failure_step)
            sxx, syy = self._fail_stress
            return self.damage.copy(), sxx * decay, syy * decay

        s_app = cfg.load_rate * t
        a_max_px = max(c.half_len_px for c in self.cracks)
        concentration = 1.0 + 2.0 * math.sqrt(a_max_px / cfg.tip_radius_px)
        base = s_app * concentration * self.load_factor
        syy = base * (1.0 + cfg.fluctuation * self.rng.uniform(-1.0, 1.0))
        sxx = cfg.xx_scale * base * (1.0 + cfg.fluctuation * self.rng.uniform(-1.0, 1.0))
        if self.failure_step == t:
            self._fail_stress = (sxx, syy)
        return self.damage.copy(), sxx, syy

    def _grow(self, t: int) -> None:
        cfg = self.config
        s_app = cfg.load_rate * t
        for crack in self.cracks:
            a_m = crack.half_len_px * cfg.pitch_m
            k_base = s_app * math.sqrt(math.pi * a_m)
            for tip in crack.tips:
                if not tip.alive:
                    continue
                noise = 1.0 + cfg.growth_noise * self.rng.uniform(-1.0, 1.0)
                if k_base * noise <= cfg.toughness:
                    continue
                tip.pos[0] += tip.direction[0]
                tip.pos[1] += tip.direction[1]
                r, c = _round_px(tip.pos[0]), _round_px(tip.pos[1])
                pixels = [(r, c)]
                if self.rng.uniform() < cfg.kink_prob:
                    pr, pc = _perp_offset(tip.direction)
                    sign = 1 if self.rng.uniform() < 0.5 else -1
                    pixels.append((r + sign * pr, c + sign * pc))
                if not (0 <= r < cfg.rows and 0 <= c < cfg.cols):
                    tip.alive = False
                    continue
                crack.half_len_px += 0.5
                met_foreign = False
                for pr, pc in pixels:
                    met_foreign |= self._deposit(crack, pr, pc)
                if met_foreign:
                    lo, hi = cfg.coalescence_drop
                    self.load_factor *= self.rng.uniform(lo, hi)
                    tip.alive = False

    def initial_frame(self) -> np.ndarray:
        return self.damage.copy()


def seed_cracks(config: SimConfig, seed: int) -> np.ndarray:
    """Just the seeded frame, before any growth step."""
    return FractureSim(config, seed).initial_frame()


def run_simulation(config: SimConfig, seed: int) -> SimulationRecord:
    sim = FractureSim(config, seed)
    t_steps = config.n_steps
    frames = np.zeros((t_steps, config.rows, config.cols), dtype=bool)
    sxx = np.zeros(t_steps)
    syy = np.zeros(t_steps)
    for t in range(1, t_steps + 1):
        frame, x, y = sim.step(t)
        frames[t - 1] = frame
        sxx[t - 1] = x
        syy[t - 1] = y
    cracks = [dict(meta, n_pixels=crack.n_pixels)
              for meta, crack in zip(sim._cells_meta, sim.cracks)]
    return SimulationRecord(seed=seed, config=config, frames=frames,
                            stress_xx=sxx, stress_yy=syy,
                            failure_step=sim.failure_step, cracks=cracks)


def generate_dataset(n_sims: int = 61, base_seed: int = 0,
                     config: SimConfig | None = None) -> list[SimulationRecord]:
    if n_sims < 1:
        raise ShapeError("need at least one simulation")
    config = config or SimConfig()
    return [run_simulation(config, base_seed + i) for i in range(n_sims)]


# ---------------------------------------------------------------------------
# on-disk dataset layout: sim_0000/{meta.json, stress.csv, damage/frame_0001.pgm ...}
# ---------------------------------------------------------------------------

def write_pgm(path, frame: np.ndarray) -> None:
    """Binary PGM, maxval 255, damaged pixels white."""
    rows, cols = frame.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    body = np.where(frame, 255, 0).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + body)


def read_pgm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":  # comment line
            pos = buf.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        fields.append(buf[start:pos])
    if fields[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM")
    cols, rows, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise DataError(f"{path}: unexpected maxval {maxval}")
    pos += 1  # single whitespace after maxval
    body = buf[pos:pos + rows * cols]
    if len(body) != rows * cols:
        raise DataError(f"{path}: truncated pixel data")
    return (np.frombuffer(body, dtype=np.uint8).reshape(rows, cols) > 0)


def _config_json_dict(config: SimConfig) -> dict:
    d = config.to_dict()
    if math.isinf(d["toughness"]):
        d["toughness"] = None
    return d


def write_record(record: SimulationRecord, sim_dir) -> None:
    sim_dir = Path(sim_dir)
    (sim_dir / "damage").mkdir(parents=True, exist_ok=True)
    meta = {
        "seed": record.seed,
        "failure_step": record.failure_step,
        "n_steps": record.n_steps,
        "config": _config_json_dict(record.config),
        "cracks": record.cracks,
    }
    (sim_dir / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    lines = ["t,sigma_xx,sigma_yy"]
    for t in range(record.n_steps):
        # repr of a Python float round-trips the exact double
        lines.append(f"{t + 1},{float(record.stress_xx[t])!r},{float(record.stress_yy[t])!r}")
    (sim_dir / "stress.csv").write_text("\n".join(lines) + "\n")
    for t in range(record.n_steps):
        write_pgm(sim_dir / "damage" / f"frame_{t + 1:04d}.pgm", record.frames[t])


def load_record(sim_dir, with_frames: bool = True) -> SimulationRecord:
    sim_dir = Path(sim_dir)
    try:
        meta = json.loads((sim_dir / "meta.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{sim_dir}: bad meta.json ({exc})") from exc
    config = SimConfig.from_dict(meta["config"])
    n = meta["n_steps"]
    sxx = np.zeros(n)
    syy = np.zeros(n)
    try:
        rows = (sim_dir / "stress.csv").read_text().strip().split("\n")
    except OSError as exc:
        raise DataError(f"{sim_dir}: missing stress.csv") from exc
    if rows[0].strip() != "t,sigma_xx,sigma_yy":
        raise DataError(f"{sim_dir}: unexpected stress.csv header")
    if len(rows) != n + 1:
        raise DataError(f"{sim_dir}: expected {n} stress rows, found {len(rows) - 1}")
    for line in rows[1:]:
        t_s, x_s, y_s = line.split(",")
        t = int(t_s)
        sxx[t - 1] = float(x_s)
        syy[t - 1] = float(y_s)
    frames = None
    if with_frames:
        frames = np.zeros((n, config.rows, config.cols), dtype=bool)
        for t in range(n):
            frames[t] = read_pgm(sim_dir / "damage" / f"frame_{t + 1:04d}.pgm")
    return SimulationRecord(seed=meta["seed"], config=config, frames=frames,
                            stress_xx=sxx, stress_yy=syy,
                            failure_step=meta["failure_step"],
                            cracks=meta.get("cracks", []))


def sim_dir_name(index: int) -> str:
    return f"sim_{index:04d}"


def write_dataset(records, root) -> list[str]:
    root = Path(root)
    names = []
    for i, rec in enumerate(records):
        name = sim_dir_name(i)
        write_record(rec, root / name)
        names.append(name)
    return names


def list_sim_dirs(root) -> list[Path]:
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset directory not found: {root}")
    dirs = sorted(p for p in root.iterdir()
                  if p.is_dir() and p.name.startswith("sim_"))
    if not dirs:
        raise DataError(f"no sim_* directories under {root}")
    return dirs
