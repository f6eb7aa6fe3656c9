"""Command line entry point.

Subcommands: generate, train, rollout, evaluate, plot. Exit codes: 0 on
success, 2 on bad arguments, 3 on data errors, 4 on numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import baselines, checkpoint, evaluation, pipeline, simulate, training
from . import model as model_mod
from .errors import CheckpointError, DataError, DomainError, NumericError, ShapeError
from .rng import SplitMix64, derive_seed


def _common(parser):
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument("--data-dir", type=Path, default=Path("data"))
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file with sim/model/train overrides")
    parser.add_argument("--profile", choices=("desk", "paper"), default="desk")


def build_parser():
    p = argparse.ArgumentParser(prog="stressnet")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic fracture dataset")
    _common(g)
    g.add_argument("--n-sims", type=int, default=61)
    g.add_argument("--base-seed", type=int, default=None,
                   help="defaults to --seed")
    g.add_argument("--steps", type=int, default=None)

    t = sub.add_parser("train", help="fit one predictor per channel")
    _common(t)
    t.add_argument("--out-dir", type=Path, required=True)
    t.add_argument("--arch", choices=("stressnet", "lstm", "bilstm", "ha"),
                   default="stressnet")
    t.add_argument("--loss", choices=training.LOSS_KINDS, default=None,
                   help="default: dynamic for stressnet, mse for baselines")
    t.add_argument("--channel", choices=("xx", "yy", "both"), default="both")
    t.add_argument("--n-train", type=int, default=55)
    t.add_argument("--n-val", type=int, default=6)
    t.add_argument("--delta-t", type=int, default=None)
    t.add_argument("--paper-faithful-norm", action="store_true",
                   help="compute min/max over every simulation, test included")

    r = sub.add_parser("rollout", help="recursive prediction for one simulation")
    _common(r)
    r.add_argument("--checkpoint", type=Path, required=True)
    r.add_argument("--sim", required=True, help="simulation directory name")
    r.add_argument("--out-dir", type=Path, required=True)

    e = sub.add_parser("evaluate", help="comparison table over the test split")
    _common(e)
    e.add_argument("--checkpoint", type=Path, action="append", required=True,
                   help="repeatable; one trained model per file")
    e.add_argument("--split", type=Path, required=True,
                   help="split.json written by train")
    e.add_argument("--out-dir", type=Path, required=True)
    e.add_argument("--plot", action="store_true",
                   help="emit plot_<sim>.svg overlays for the test sims")

    pl = sub.add_parser("plot", help="overlay rollout CSVs into one SVG")
    _common(pl)
    pl.add_argument("--rollout", action="append", required=True,
                    metavar="NAME=CSV", help="repeatable series source")
    pl.add_argument("--out", type=Path, required=True)
    return p


def _overrides(args):
    if args.config is None:
        return {}
    try:
        return json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read --config: {exc}") from exc


def _sim_config(overrides, steps=None) -> simulate.SimConfig:
    d = dict(overrides.get("sim", {}))
    if steps is not None:
        d["n_steps"] = steps
    if d.get("toughness") is None and "toughness" in d:
        d["toughness"] = math.inf
    cfg = simulate.SimConfig()
    if d:
        base = cfg.to_dict()
        base.update(d)
        cfg = simulate.SimConfig.from_dict(base)
    return cfg


def cmd_generate(args) -> int:
    overrides = _overrides(args)
    cfg = _sim_config(overrides, args.steps)
    base_seed = args.base_seed if args.base_seed is not None else args.seed
    args.data_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.n_sims):
        record = simulate.run_simulation(cfg, base_seed + i)
        simulate.write_record(record, args.data_dir / simulate.sim_dir_name(i))
        print(f"wrote {simulate.sim_dir_name(i)} "
              f"(failure_step={record.failure_step})")
    return 0


def _train_config(args, overrides) -> training.TrainConfig:
    base = (training.TrainConfig.desk() if args.profile == "desk"
            else training.TrainConfig.paper_scale())
    if args.profile == "paper":
        print("note: the paper-scale profile runs 1800 epochs; expect hours "
              "of wall-clock time")
    fields = dict(overrides.get("train", {}))
    fields["seed"] = args.seed
    fields.setdefault("n_val_per_epoch", args.n_val)
    if args.loss is not None:
        fields["loss"] = args.loss
    elif args.arch != "stressnet":
        fields["loss"] = "mse"
    return replace(base, **fields)


def _model_config(args, overrides) -> model_mod.StressNetConfig:
    fields = dict(overrides.get("model", {}))
    if args.delta_t is not None:
        fields["delta_t"] = args.delta_t
    base = model_mod.StressNetConfig().to_dict()
    base.update(fields)
    return model_mod.StressNetConfig.from_dict(base)


def _build_model(args, channel, mcfg, tcfg):
    if args.arch == "stressnet":
        return model_mod.StressNet(mcfg, channel, seed=args.seed,
                                   loss_name=tcfg.loss)
    delta_t = args.delta_t or baselines.BASELINE_DELTA_T
    if args.arch == "lstm":
        return baselines.StressOnlyLSTM(channel, delta_t, mcfg.lstm_hidden,
                                        seed=args.seed, loss_name=tcfg.loss)
    return baselines.StressOnlyBiLSTM(channel, delta_t, mcfg.lstm_hidden,
                                      seed=args.seed, loss_name=tcfg.loss)


def cmd_train(args) -> int:
    overrides = _overrides(args)
    tcfg = _train_config(args, overrides)
    mcfg = _model_config(args, overrides)
    prepared = pipeline.prepare_dataset(args.data_dir)
    plan = pipeline.split_dataset(
        sorted(prepared), n_train=args.n_train, n_val_per_epoch=tcfg.n_val_per_epoch,
        rng=SplitMix64(derive_seed(args.seed, "split")))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "split.json").write_text(
        json.dumps(plan.to_dict(), indent=1, sort_keys=True))

    channels = ("xx", "yy") if args.channel == "both" else (args.channel,)
    for channel in channels:
        stats = pipeline.stats_for_split(prepared, plan, channel,
                                         paper_faithful=args.paper_faithful_norm)
        tag = f"{args.arch}_{tcfg.loss}_{channel}" if args.arch == "stressnet" \
            else f"{args.arch}_{channel}"
        if args.arch == "ha":
            series = [pipeline.normalize(prepared[s].stress_raw[channel], stats)
                      for s in plan.train_ids]
            ha = baselines.fit_historical_average(series, channel,
                                                  delta_t=mcfg.delta_t)
            baselines.save_baseline(ha, args.out_dir / f"{tag}.ckpt",
                                    norm=stats.to_dict())
            print(f"fitted {tag}")
            continue
        model = _build_model(args, channel, mcfg, tcfg)
        history = training.train(model, prepared, plan, stats, tcfg)
        history.to_csv(args.out_dir / f"history_{tag}.csv")
        if args.arch == "stressnet":
            model_mod.save_checkpoint(model, args.out_dir / f"{tag}.ckpt",
                                      norm=stats.to_dict())
        else:
            baselines.save_baseline(model, args.out_dir / f"{tag}.ckpt",
                                    norm=stats.to_dict())
        print(f"trained {tag}: best val MAPE {history.best_val_mape:.4f} "
              f"at epoch {history.best_epoch}")
    training.write_train_config(
        args.out_dir / "train_config.json", tcfg,
        extra={"model": mcfg.to_dict(), "arch": args.arch,
               "paper_faithful_norm": bool(args.paper_faithful_norm)})
    return 0


def _load_any(path):
    try:
        with open(path, "rb") as fh:
            magic = fh.read(8)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint: {exc}") from exc
    arch = checkpoint.ARCH_BY_MAGIC.get(magic)
    if arch is None:
        raise CheckpointError(f"bad checkpoint magic in {path}")
    if arch == "stressnet":
        return model_mod.load_checkpoint(path)
    return baselines.load_baseline(path)


def _stats_from_model(model) -> pipeline.NormalizationStats:
    norm = getattr(model, "norm", None)
    if not norm:
        raise DataError("checkpoint carries no normalization stats")
    return pipeline.NormalizationStats.from_dict(norm)


def cmd_rollout(args) -> int:
    model = _load_any(args.checkpoint)
    stats = _stats_from_model(model)
    sim = pipeline.prepare_sim_dir(args.data_dir / args.sim,
                                   args.data_dir / "cache")
    res = evaluation.rollout_any(model, sim, stats)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out_dir / f"rollout_{args.sim}.csv"
    evaluation.write_rollout_csv(out, res)
    print(f"{args.sim}: MAPE {res.mape_raw:.4f} "
          f"({res.seconds:.2f} s, wrote {out})")
    return 0


def cmd_evaluate(args) -> int:
    try:
        plan = pipeline.SplitPlan.from_dict(json.loads(args.split.read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"cannot read --split: {exc}") from exc
    models = [_load_any(p) for p in args.checkpoint]
    stats_by_channel = {}
    for m in models:
        stats_by_channel.setdefault(m.channel, _stats_from_model(m))
    test_sims = {sid: pipeline.prepare_sim_dir(args.data_dir / sid,
                                               args.data_dir / "cache")
                 for sid in plan.test_ids}
    args.out_dir.mkdir(parents=True, exist_ok=True)
    rows = evaluation.evaluate(models, test_sims, stats_by_channel,
                               out_dir=args.out_dir)
    print(evaluation.format_table(rows))
    if args.plot:
        for sid, sim in sorted(test_sims.items()):
            for channel in sorted(stats_by_channel):
                series = {}
                stats = stats_by_channel[channel]
                chan_models = [m for m in models if m.channel == channel]
                if not chan_models:
                    continue
                delta_t = max(m.delta_t for m in chan_models)
                truth = sim.stress_raw[channel]
                t_axis = list(range(1, sim.n_steps + 1))
                series["truth"] = (t_axis, truth)
                for m in chan_models:
                    res = evaluation.rollout_any(m, sim, stats)
                    t_pred = list(range(m.delta_t + 1, sim.n_steps + 1))
                    series[getattr(m, "display", m.arch)] = (t_pred, res.pred_raw)
                evaluation.plot_series_svg(
                    args.out_dir / f"plot_{sid}_{channel}.svg", series,
                    title=f"{sid} channel {channel}")
    return 0


def cmd_plot(args) -> int:
    series = {}
    for item in args.rollout:
        name, _, path = item.partition("=")
        if not path:
            name, path = Path(item).stem, item
        t, truth, pred = evaluation.read_rollout_csv(path)
        if "truth" not in series:
            series["truth"] = (t, truth)
        series[name] = (t, pred)
    evaluation.plot_series_svg(args.out, series)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "rollout": cmd_rollout,
    "evaluate": cmd_evaluate,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except (ShapeError, DomainError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
