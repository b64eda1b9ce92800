"""Batch command-line front-end.

Subcommands wire the pipeline over a single output directory:

    simulate -> data/seed{S}/{truth,measurements}.csv  (+ manifest.json)
    filter   -> filters/seed{S}/lag{L}.csv
    infer    -> smc2/seed{S}/{iterations,posterior}_lag{L}.csv
    evaluate -> eval/{per_run,summary}.csv + eval/curves/*.csv
    report   -> report/*.png

Exit codes: 0 success, 2 configuration error, 3 particle degeneracy,
4 missing or malformed inputs/outputs.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfg
from . import metrics, report
from .buffer import MeasurementBuffer
from .datagen import (simulate_dataset, write_measurements_csv,
                      write_truth_csv, read_truth_csv)
from .exceptions import ConfigError, DegeneracyError, InputError
from .filters import run_filter
from .parallel import parallel_map
from .smc2 import run_smc2

log = logging.getLogger("epilag")


def _add_common(parser):
    parser.add_argument("--out", required=True, help="run output directory")
    parser.add_argument("--seed", type=int, help="single seed")
    parser.add_argument("--seeds", help="seed range N..M or list")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel fan-out over (seed, lag) jobs")


def _resolve_seeds(args, default):
    if args.seed is not None and args.seeds:
        raise ConfigError("use --seed or --seeds, not both")
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be non-negative")
        return [args.seed]
    if args.seeds:
        return cfg.parse_seed_range(args.seeds)
    return default


def cmd_simulate(args) -> int:
    settings = cfg.load_settings(args.preset, args.config)
    seeds = _resolve_seeds(args, default=[1])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = cfg.RunManifest(args.preset, args.config, settings, seeds, str(out_dir))
    manifest.save()
    comments = {"config": manifest.config_hash}
    sensors = cfg.build_sensors(settings)
    for seed in seeds:
        sim_config = cfg.build_sim_config(settings, seed)
        states, regimes, measurements = simulate_dataset(sim_config, sensors)
        seed_dir = out_dir / "data" / f"seed{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        write_truth_csv(seed_dir / "truth.csv", states, regimes, comments)
        write_measurements_csv(seed_dir / "measurements.csv", measurements, comments)
        log.info("seed %d: %d days, %d measurements", seed, len(states), len(measurements))
    return 0


def _filter_job(task):
    out_dir, settings, comments, seed, lag = task
    data_dir = Path(out_dir) / "data" / f"seed{seed}"
    if not (data_dir / "measurements.csv").exists():
        raise InputError(f"{data_dir}/measurements.csv missing; run `simulate` first")
    buffer = MeasurementBuffer.from_csv(data_dir / "measurements.csv")
    horizon = settings["simulate"]["horizon"]
    filter_config = cfg.build_filter_config(settings, lag, seed)
    started = time.perf_counter()
    output = run_filter(filter_config, buffer, horizon)
    elapsed = time.perf_counter() - started
    dest = Path(out_dir) / "filters" / f"seed{seed}"
    dest.mkdir(parents=True, exist_ok=True)
    output.write_csv(dest / f"lag{lag}.csv",
                     {**comments, "runtime_seconds": f"{elapsed:.3f}"})
    return seed, lag, elapsed


def cmd_filter(args) -> int:
    manifest = cfg.RunManifest.load(args.out)
    settings = manifest.settings
    seeds = _resolve_seeds(args, default=manifest.seeds)
    lags = [args.lag] if args.lag is not None else settings["filter"]["lags"]
    comments = {"config": manifest.config_hash}
    tasks = [(args.out, settings, comments, seed, lag) for seed in seeds for lag in lags]
    for seed, lag, elapsed in parallel_map(_filter_job, tasks, args.workers):
        log.info("filtered seed %d lag %d in %.2fs", seed, lag, elapsed)
    return 0


def _infer_job(task):
    out_dir, settings, comments, seed, lag = task
    data_dir = Path(out_dir) / "data" / f"seed{seed}"
    if not (data_dir / "measurements.csv").exists():
        raise InputError(f"{data_dir}/measurements.csv missing; run `simulate` first")
    buffer = MeasurementBuffer.from_csv(data_dir / "measurements.csv")
    smc2_config = cfg.build_smc2_config(settings, seed=seed, lag=lag)
    result = run_smc2(smc2_config, buffer, settings["simulate"]["horizon"])
    dest = Path(out_dir) / "smc2" / f"seed{seed}"
    dest.mkdir(parents=True, exist_ok=True)
    result.write_iterations_csv(dest / f"iterations_lag{lag}.csv", comments)
    result.write_posterior_csv(dest / f"posterior_lag{lag}.csv", comments)
    return seed, lag, result.recycled_theta


def cmd_infer(args) -> int:
    manifest = cfg.RunManifest.load(args.out)
    settings = manifest.settings
    seeds = _resolve_seeds(args, default=manifest.seeds)
    lag = args.lag if args.lag is not None else settings["smc2"]["lag"]
    comments = {"config": manifest.config_hash}
    tasks = [(args.out, settings, comments, seed, lag) for seed in seeds]
    for seed, used_lag, theta_hat in parallel_map(_infer_job, tasks, args.workers):
        log.info("seed %d lag %d recycled estimate: %s", seed, used_lag,
                 np.array2string(theta_hat, precision=4))
    return 0


def cmd_evaluate(args) -> int:
    manifest = cfg.RunManifest.load(args.out)
    settings = manifest.settings
    seeds = _resolve_seeds(args, default=manifest.seeds)
    lags = [args.lag] if args.lag is not None else settings["filter"]["lags"]
    eval_start = args.eval_start if args.eval_start is not None \
        else settings["evaluate"]["eval_start"]
    out_dir = Path(args.out)
    curves_dir = out_dir / "eval" / "curves"
    curves_dir.mkdir(parents=True, exist_ok=True)
    comments = {"config": manifest.config_hash}

    from .filters import FilterOutput
    per_run = []
    for seed in seeds:
        truth_path = out_dir / "data" / f"seed{seed}" / "truth.csv"
        if not truth_path.exists():
            raise InputError(f"{truth_path} missing; run `simulate` first")
        t, _, regimes = read_truth_csv(truth_path)
        for lag in lags:
            filt_path = out_dir / "filters" / f"seed{seed}" / f"lag{lag}.csv"
            if not filt_path.exists():
                raise InputError(f"{filt_path} missing; run `filter` first")
            output = FilterOutput.read_csv(filt_path)
            # Score each day at its final in-window revision: the lag
            # window's whole point is that late data corrects recent days,
            # and the revised series is what the summary table measures.
            series = metrics.EvalSeries.from_run(t, regimes, output.t,
                                                 output.outbreak_prob_final, eval_start)
            intervals = metrics.intervals_from_regimes(series.t, series.o_true)
            roc_curve, auroc = metrics.roc(series)
            amoc_curve, auamoc = metrics.amoc(series, outbreak_intervals=intervals)
            roc_curve.write_csv(curves_dir / f"seed{seed}_lag{lag}_roc.csv", comments)
            amoc_curve.write_csv(curves_dir / f"seed{seed}_lag{lag}_amoc.csv", comments)
            per_run.append((seed, lag, metrics.mse(series), auroc, auamoc))

    with open(out_dir / "eval" / "per_run.csv", "w", newline="") as fh:
        fh.write(f"# config={manifest.config_hash}\n")
        fh.write("seed,lag,mse,auroc,auamoc\n")
        for seed, lag, m, a, am in per_run:
            fh.write(f"{seed},{lag},{m!r},{a!r},{am!r}\n")

    with open(out_dir / "eval" / "summary.csv", "w", newline="") as fh:
        fh.write(f"# config={manifest.config_hash}\n")
        fh.write("lag,n_seeds,mse_mean,mse_sd,auroc_mean,auroc_sd,auamoc_mean,auamoc_sd\n")
        for lag in lags:
            rows = [r for r in per_run if r[1] == lag]
            summary = metrics.summarize({
                "mse": [r[2] for r in rows],
                "auroc": [r[3] for r in rows],
                "auamoc": [r[4] for r in rows],
            })
            fh.write(",".join([str(lag), str(len(rows))] + [
                f"{summary[name][j]!r}" for name in ("mse", "auroc", "auamoc")
                for j in (0, 1)]) + "\n")
            log.info("lag %d: MSE %.4f (%.4f)  AUROC %.4f (%.4f)  AUAMOC %.4f (%.4f)",
                     lag, *[summary[n][j] for n in ("mse", "auroc", "auamoc") for j in (0, 1)])
    return 0


def cmd_report(args) -> int:
    manifest = cfg.RunManifest.load(args.out)
    seeds = _resolve_seeds(args, default=manifest.seeds)
    written = report.render_run(args.out, manifest.settings, seeds)
    for path in written:
        log.info("wrote %s", path)
    if not written:
        raise InputError(f"nothing to render under {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epilag",
        description="Outbreak-regime filtering from delayed surveillance streams")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate truth and measurement CSVs")
    p.add_argument("--preset", default="desk", help=f"one of {sorted(cfg.PRESETS)}")
    p.add_argument("--config", help="INI file overriding preset values")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", help="run the fixed-lag filter per seed and lag")
    p.add_argument("--lag", type=int, help="single lag (default: config lags)")
    _add_common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("infer", help="SMC^2 parameter estimation per seed")
    p.add_argument("--lag", type=int, help="inner filter lag (default: config)")
    _add_common(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="score filter outputs against truth")
    p.add_argument("--lag", type=int, help="single lag (default: config lags)")
    p.add_argument("--eval-start", type=int, help="first evaluated day")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render figures from run outputs")
    _add_common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DegeneracyError as exc:
        print(f"degeneracy: {exc}; diagnostics: {exc.diagnostics}", file=sys.stderr)
        return 3
    except (InputError, OSError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
