"""Figure rendering for completed runs.

Reads the delimited outputs of a run directory and writes PNG figures next
to them: ground-truth trajectories with shaded outbreaks, per-lag outbreak
probability tracks, ROC/AMOC curves, and pooled posterior histograms when
parameter inference was run. Only figures whose inputs exist are rendered.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .datagen import read_truth_csv
from .filters import FilterOutput
from .metrics import intervals_from_regimes
from .model import PARAM_NAMES

LAG_STYLES = {0: ("tab:blue", "-"), 3: ("tab:red", "-."), 7: ("tab:green", "--")}
_FALLBACK_STYLES = [("tab:purple", ":"), ("tab:orange", "-"), ("tab:brown", "--")]


def _lag_style(lag: int, rank: int):
    return LAG_STYLES.get(lag, _FALLBACK_STYLES[rank % len(_FALLBACK_STYLES)])


def _shade_outbreaks(ax, t, regimes):
    for start, end in intervals_from_regimes(t, regimes):
        ax.axvspan(start, end, color="0.85", zorder=0)


def _read_curve_csv(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return rows[0], data


def render_trajectories(truth_path, fig_path) -> None:
    t, states, regimes = read_truth_csv(truth_path)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    _shade_outbreaks(ax, t, regimes)
    for idx, (label, color) in enumerate(
            [("Susceptible", "tab:blue"), ("Exposed", "tab:orange"),
             ("Infectious", "tab:red"), ("Recovered", "tab:green")]):
        ax.plot(t, states[:, idx], color=color, lw=1.2, label=label)
    ax.set_xlabel("day")
    ax.set_ylabel("individuals")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)


def render_outbreak_prob(truth_path, filter_paths: dict, fig_path,
                         eval_start: int | None = None) -> None:
    """Per-lag filtering outbreak probabilities over the truth shading."""
    t, _, regimes = read_truth_csv(truth_path)
    fig, ax = plt.subplots(figsize=(8, 3.5))
    _shade_outbreaks(ax, t, regimes)
    for rank, (lag, path) in enumerate(sorted(filter_paths.items())):
        out = FilterOutput.read_csv(path)
        color, style = _lag_style(lag, rank)
        ax.plot(out.t, out.outbreak_prob, color=color, ls=style, lw=1.0,
                label=f"lag = {lag}")
    if eval_start is not None:
        ax.axvline(eval_start, color="k", lw=0.8, ls=":")
    ax.set_xlabel("day")
    ax.set_ylabel("outbreak probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)


def render_curves(curve_paths: dict, fig_path, kind: str) -> None:
    """Overlay per-lag ROC or AMOC curves from curve-point CSVs."""
    fig, ax = plt.subplots(figsize=(4.5, 4))
    for rank, (lag, path) in enumerate(sorted(curve_paths.items())):
        header, data = _read_curve_csv(path)
        order = np.argsort(data[:, 1])
        color, style = _lag_style(lag, rank)
        ax.plot(data[order, 1], data[order, 2], color=color, ls=style, lw=1.2,
                label=f"lag = {lag}")
        ax.set_xlabel(header[1].replace("_", " "))
        ax.set_ylabel(header[2].replace("_", " "))
    if kind == "roc":
        ax.plot([0, 1], [0, 1], color="0.6", lw=0.8, ls=":")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)


def render_posteriors(posterior_paths: dict, theta_true, fig_path) -> None:
    """Weighted per-parameter histograms, pooled across seeds, per lag."""
    fig, axes = plt.subplots(1, 5, figsize=(14, 2.8))
    for rank, (lag, paths) in enumerate(sorted(posterior_paths.items())):
        samples, weights = [], []
        for path in paths:
            _, data = _read_curve_csv(path)  # same comment-skipping reader
            samples.append(data[:, :5])
            weights.append(data[:, 5])
        samples = np.vstack(samples)
        weights = np.concatenate(weights)
        weights = weights / weights.sum()
        color, _ = _lag_style(lag, rank)
        for p, ax in enumerate(axes):
            ax.hist(samples[:, p], bins=30, weights=weights, histtype="step",
                    color=color, label=f"lag = {lag}")
    for p, ax in enumerate(axes):
        if theta_true is not None:
            ax.axvline(theta_true[p], color="k", lw=1.0)
        ax.set_xlabel(PARAM_NAMES[p])
        ax.set_yticks([])
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)


def render_run(out_dir, settings, seeds) -> list[Path]:
    """Render every figure whose inputs exist under out_dir; returns paths."""
    out_dir = Path(out_dir)
    report_dir = out_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    written = []
    eval_start = settings["evaluate"]["eval_start"]
    theta_true = settings["simulate"]["theta_true"]

    lead = seeds[0]
    truth = out_dir / "data" / f"seed{lead}" / "truth.csv"
    if truth.exists():
        path = report_dir / f"trajectories_seed{lead}.png"
        render_trajectories(truth, path)
        written.append(path)
        filter_paths = {lag: out_dir / "filters" / f"seed{lead}" / f"lag{lag}.csv"
                        for lag in settings["filter"]["lags"]}
        filter_paths = {lag: p for lag, p in filter_paths.items() if p.exists()}
        if filter_paths:
            path = report_dir / f"outbreak_prob_seed{lead}.png"
            render_outbreak_prob(truth, filter_paths, path, eval_start)
            written.append(path)

    for kind in ("roc", "amoc"):
        curves = {lag: out_dir / "eval" / "curves" / f"seed{lead}_lag{lag}_{kind}.csv"
                  for lag in settings["filter"]["lags"]}
        curves = {lag: p for lag, p in curves.items() if p.exists()}
        if curves:
            path = report_dir / f"{kind}_seed{lead}.png"
            render_curves(curves, path, kind)
            written.append(path)

    posterior = {}
    for lag in sorted({settings["smc2"]["lag"], *settings["filter"]["lags"]}):
        paths = [out_dir / "smc2" / f"seed{s}" / f"posterior_lag{lag}.csv" for s in seeds]
        paths = [p for p in paths if p.exists()]
        if paths:
            posterior[lag] = paths
    if posterior:
        path = report_dir / "posterior_pooled.png"
        render_posteriors(posterior, theta_true, path)
        written.append(path)
    return written
