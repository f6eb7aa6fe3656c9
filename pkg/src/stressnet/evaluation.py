"""Recursive rollout, comparison-table evaluation and SVG plotting.

A rollout starts from the true (normalized) stress of the first delta_t
steps and then feeds every new prediction back into the input window, while
the damage frames stay ground truth throughout. The reported MAPE is scored
on denormalized (raw Pa) values against the raw truth; a floored
normalized-scale figure is kept alongside for reference.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError
from .losses import mape, mape_floored
from .pipeline import NormalizationStats, PreparedSim, denormalize, normalize


@dataclass
class RolloutResult:
    sim_id: str
    channel: str
    pred_norm: np.ndarray        # (T - delta_t,) model outputs in (0, 1)
    pred_raw: np.ndarray         # denormalized predictions
    truth_raw: np.ndarray        # matching raw truth, steps delta_t+1 .. T
    mape_raw: float
    mape_norm_ref: float
    seconds: float
    delta_t: int
    # filled only when trace=True
    window_provenance: list = field(default_factory=list, repr=False)
    window_values: list = field(default_factory=list, repr=False)


def rollout(model, sim: PreparedSim, stats: NormalizationStats,
            trace: bool = False) -> RolloutResult:
    """Recursive multi-step prediction over one simulation."""
    delta_t = model.delta_t
    t_steps = sim.n_steps
    if t_steps < delta_t + 1:
        raise DataError(f"{sim.sim_id}: too short for a delta_t={delta_t} rollout")
    truth_raw = sim.stress_raw[model.channel]
    if model.uses_damage and sim.frames.shape[2] != t_steps:
        raise DataError(f"{sim.sim_id}: missing damage frames")

    truth_norm = np.clip(normalize(truth_raw, stats), 0.0, 1.0)
    series = truth_norm.copy()
    preds = np.zeros(t_steps - delta_t)
    provenance, windows = [], []

    start = time.perf_counter()
    for j in range(t_steps - delta_t):
        window = series[j:j + delta_t]
        if trace:
            provenance.append(np.arange(j, j + delta_t) >= delta_t)
            windows.append(window.copy())
        if model.uses_damage:
            pred, _ = model.forward_one(window, sim.frames[:, :, j:j + delta_t])
        else:
            pred, _ = model.forward_one(window)
        preds[j] = pred
        series[delta_t + j] = pred
    seconds = time.perf_counter() - start

    pred_raw = denormalize(preds, stats)
    return RolloutResult(
        sim_id=sim.sim_id, channel=model.channel,
        pred_norm=preds, pred_raw=pred_raw, truth_raw=truth_raw[delta_t:].copy(),
        mape_raw=mape(pred_raw, truth_raw[delta_t:]),
        mape_norm_ref=mape_floored(preds, truth_norm[delta_t:]),
        seconds=seconds, delta_t=delta_t,
        window_provenance=provenance, window_values=windows)


def rollout_historical_average(model, sim: PreparedSim,
                               stats: NormalizationStats) -> RolloutResult:
    delta_t = model.delta_t
    t_steps = sim.n_steps
    if model.mean_norm.shape[0] != t_steps:
        raise DataError(f"{sim.sim_id}: historical average fitted on a "
                        f"different series length")
    truth_raw = sim.stress_raw[model.channel]
    truth_norm = np.clip(normalize(truth_raw, stats), 0.0, 1.0)
    start = time.perf_counter()
    preds = np.array([model.predict(t) for t in range(delta_t + 1, t_steps + 1)])
    seconds = time.perf_counter() - start
    pred_raw = denormalize(preds, stats)
    return RolloutResult(
        sim_id=sim.sim_id, channel=model.channel,
        pred_norm=preds, pred_raw=pred_raw, truth_raw=truth_raw[delta_t:].copy(),
        mape_raw=mape(pred_raw, truth_raw[delta_t:]),
        mape_norm_ref=mape_floored(preds, truth_norm[delta_t:]),
        seconds=seconds, delta_t=delta_t)


def rollout_any(model, sim: PreparedSim, stats: NormalizationStats,
                trace: bool = False) -> RolloutResult:
    if model.arch == "historical_average":
        return rollout_historical_average(model, sim, stats)
    return rollout(model, sim, stats, trace=trace)


# ---------------------------------------------------------------------------
# evaluation table
# ---------------------------------------------------------------------------

@dataclass
class TableRow:
    model: str
    channel: str
    mape: float
    mape_norm_ref: float
    per_sim: dict


def evaluate(predictors, test_sims: dict, stats_by_channel: dict,
             out_dir=None) -> list[TableRow]:
    """Roll out every predictor over every test simulation.

    ``predictors`` is a list of models carrying .display and .channel.
    Writes results_table.csv plus per-model rollout CSVs when out_dir is
    given.
    """
    if not predictors:
        raise DataError("no predictors to evaluate")
    if not test_sims:
        raise DataError("no test simulations")
    rows = []
    for model in predictors:
        channel = model.channel
        if channel not in stats_by_channel:
            raise DataError(f"no normalization stats for channel {channel}")
        stats = stats_by_channel[channel]
        per_sim = {}
        results = []
        for sim_id in sorted(test_sims):
            res = rollout_any(model, test_sims[sim_id], stats)
            per_sim[sim_id] = res.mape_raw
            results.append(res)
        row = TableRow(
            model=getattr(model, "display", model.arch),
            channel=channel,
            mape=float(np.mean([r.mape_raw for r in results])),
            mape_norm_ref=float(np.mean([r.mape_norm_ref for r in results])),
            per_sim=per_sim,
        )
        rows.append(row)
        if out_dir is not None:
            model_dir = Path(out_dir) / _slug(row.model) / channel
            model_dir.mkdir(parents=True, exist_ok=True)
            for res in results:
                write_rollout_csv(model_dir / f"rollout_{res.sim_id}.csv", res)
    if out_dir is not None:
        write_results_csv(Path(out_dir) / "results_table.csv", rows)
        write_results_csv(Path(out_dir) / "results_table_normalized.csv", rows,
                          normalized=True)
    return rows


def _slug(name: str) -> str:
    keep = [c.lower() if c.isalnum() else "_" for c in name]
    out = "".join(keep).strip("_")
    while "__" in out:
        out = out.replace("__", "_")
    return out


def write_rollout_csv(path, res: RolloutResult) -> None:
    lines = ["t,truth,pred"]
    for i in range(res.pred_raw.shape[0]):
        t = res.delta_t + 1 + i
        lines.append(f"{t},{float(res.truth_raw[i])!r},{float(res.pred_raw[i])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_rollout_csv(path):
    rows = Path(path).read_text().strip().split("\n")
    if rows[0].strip() != "t,truth,pred":
        raise DataError(f"{path}: unexpected rollout header")
    t, truth, pred = [], [], []
    for line in rows[1:]:
        a, b, c = line.split(",")
        t.append(int(a))
        truth.append(float(b))
        pred.append(float(c))
    return np.array(t), np.array(truth), np.array(pred)


def write_results_csv(path, rows, normalized: bool = False) -> None:
    lines = ["model,channel,mape"]
    for r in rows:
        value = r.mape_norm_ref if normalized else r.mape
        lines.append(f"{r.model},{r.channel},{float(value)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def format_table(rows) -> str:
    """Aligned text table, one model per line, one column per channel."""
    channels = sorted({r.channel for r in rows})
    models = []
    for r in rows:
        if r.model not in models:
            models.append(r.model)
    by_key = {(r.model, r.channel): r.mape for r in rows}
    name_w = max(len("Models"), *(len(m) for m in models)) + 2
    header = "Models".ljust(name_w) + "".join(
        f"Channel {c}".rjust(14) for c in channels)
    lines = [header, "-" * len(header)]
    for m in models:
        cells = []
        for c in channels:
            v = by_key.get((m, c))
            cells.append(f"{v:.4f}".rjust(14) if v is not None else "-".rjust(14))
        lines.append(m.ljust(name_w) + "".join(cells))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# SVG plotting
# ---------------------------------------------------------------------------

_PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd",
            "#8c564b", "#17becf")

PLOT_WIDTH, PLOT_HEIGHT = 960, 520
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 24, 28, 48


def plot_series_svg(path, series: dict, title: str = "") -> None:
    """Standalone SVG line plot.

    ``series`` maps a legend name to (x array, y array); all series share
    axes spanning the min/max over every array.
    """
    if not series:
        raise DataError("nothing to plot")
    for name, (x, y) in series.items():
        if len(x) != len(y):
            raise ShapeError(f"series {name}: x and y lengths differ")
    xs = np.concatenate([np.asarray(x, dtype=np.float64) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, dtype=np.float64) for _, y in series.values()])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    inner_w = PLOT_WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    inner_h = PLOT_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(v):
        return MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * inner_w

    def sy(v):
        return MARGIN_TOP + (1.0 - (v - y_lo) / (y_hi - y_lo)) * inner_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_WIDTH}" '
        f'height="{PLOT_HEIGHT}" viewBox="0 0 {PLOT_WIDTH} {PLOT_HEIGHT}">',
        f'<rect x="0" y="0" width="{PLOT_WIDTH}" height="{PLOT_HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{inner_w}" '
        f'height="{inner_h}" fill="none" stroke="#333" stroke-width="1"/>',
    ]
    if title:
        parts.append(f'<text x="{PLOT_WIDTH / 2:.1f}" y="18" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="14">{title}</text>')
    # axis extreme labels
    parts.append(f'<text x="{MARGIN_LEFT}" y="{PLOT_HEIGHT - 26}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="11">{x_lo:g}</text>')
    parts.append(f'<text x="{MARGIN_LEFT + inner_w}" y="{PLOT_HEIGHT - 26}" '
                 f'text-anchor="middle" font-family="sans-serif" font-size="11">{x_hi:g}</text>')
    parts.append(f'<text x="{MARGIN_LEFT - 6}" y="{MARGIN_TOP + inner_h}" '
                 f'text-anchor="end" font-family="sans-serif" font-size="11">{y_lo:.6g}</text>')
    parts.append(f'<text x="{MARGIN_LEFT - 6}" y="{MARGIN_TOP + 10}" '
                 f'text-anchor="end" font-family="sans-serif" font-size="11">{y_hi:.6g}</text>')

    for i, (name, (x, y)) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{sx(float(a)):.2f},{sy(float(b)):.2f}"
                       for a, b in zip(x, y))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{pts}"/>')
        ly = MARGIN_TOP + 16 + 16 * i
        lx = MARGIN_LEFT + inner_w - 180
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly}" font-family="sans-serif" '
                     f'font-size="12">{name}</text>')
    parts.append("</svg>")
    try:
        Path(path).write_text("\n".join(parts))
    except OSError as exc:
        raise DataError(f"cannot write plot: {exc}") from exc
