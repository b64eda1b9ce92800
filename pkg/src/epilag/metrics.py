"""Scoring of outbreak-probability trajectories against ground truth.

MSE measures calibration of the daily outbreak probability, ROC/AUROC the
day-level discrimination across alarm thresholds, and AMOC the trade-off
between detection delay and false-alarm rate. Everything is computed on
the post-burn-in evaluation window only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError, UndefinedRateError


@dataclass(frozen=True)
class EvalSeries:
    """Aligned per-day truth indicator and estimated outbreak probability."""

    t: np.ndarray
    o_true: np.ndarray
    p_est: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=int)
        o = np.asarray(self.o_true, dtype=int)
        p = np.asarray(self.p_est, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "o_true", o)
        object.__setattr__(self, "p_est", p)
        if not (len(t) == len(o) == len(p)):
            raise InputError("t, o_true, p_est must have equal lengths")
        if len(t) == 0:
            raise InputError("empty evaluation window")
        if np.any((p < 0) | (p > 1)):
            raise InputError("p_est must lie in [0, 1]")
        if not np.all(np.isin(o, (0, 1))):
            raise InputError("o_true must be 0/1")

    @staticmethod
    def from_run(truth_t, truth_regime, filter_t, outbreak_prob,
                 eval_start: int) -> "EvalSeries":
        """Align a truth trajectory with a filter output and window it."""
        truth_t = np.asarray(truth_t)
        filter_t = np.asarray(filter_t)
        if len(truth_t) != len(filter_t) or np.any(truth_t != filter_t):
            raise InputError("truth and filter outputs cover different horizons")
        keep = truth_t >= eval_start
        if not np.any(keep):
            raise InputError(f"no days at or after eval_start={eval_start}")
        return EvalSeries(truth_t[keep], np.asarray(truth_regime)[keep],
                          np.asarray(outbreak_prob)[keep])


@dataclass(frozen=True)
class Curve:
    """Threshold-indexed operating curve (ROC or AMOC), plot-ready."""

    thresholds: np.ndarray
    x: np.ndarray
    y: np.ndarray
    x_label: str
    y_label: str

    def write_csv(self, path, comments: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            for key, value in (comments or {}).items():
                fh.write(f"# {key}={value}\n")
            writer = csv.writer(fh)
            writer.writerow(["threshold", self.x_label, self.y_label])
            for k in range(len(self.thresholds)):
                writer.writerow([repr(float(self.thresholds[k])),
                                 repr(float(self.x[k])), repr(float(self.y[k]))])


def default_thresholds(p_est=None) -> np.ndarray:
    """101 even thresholds on [0, 1] plus every distinct predicted value."""
    grid = np.linspace(0.0, 1.0, 101)
    if p_est is not None:
        grid = np.concatenate([grid, np.asarray(p_est, dtype=float)])
    return np.unique(grid)


def mse(series: EvalSeries) -> float:
    """Mean squared error between the outbreak indicator and its estimate."""
    diff = series.o_true - series.p_est
    return float(np.mean(diff * diff))


def roc(series: EvalSeries, thresholds=None) -> tuple[Curve, float]:
    """Pooled per-day ROC curve and its trapezoidal area.

    An outbreak is predicted on a day when p_est exceeds the threshold. A
    window with no outbreak days or no quiet days has undefined rates.
    """
    thr = default_thresholds(series.p_est) if thresholds is None else np.asarray(thresholds, float)
    if 0.0 not in thr or 1.0 not in thr:
        raise InputError("thresholds must include 0 and 1")
    positives = int(series.o_true.sum())
    negatives = len(series.o_true) - positives
    if positives == 0 or negatives == 0:
        raise UndefinedRateError(
            f"window has {positives} outbreak and {negatives} quiet days; "
            "TPR/FPR undefined")
    preds = series.p_est[None, :] > thr[:, None]
    is_pos = series.o_true == 1
    tpr = (preds & is_pos).sum(axis=1) / positives
    fpr = (preds & ~is_pos).sum(axis=1) / negatives
    curve = Curve(thr, fpr, tpr, "fpr", "tpr")
    # Anchor the endpoints so the area matches the rank interpretation even
    # when no threshold reaches a corner (e.g. ties at p_est == 0).
    xs = np.concatenate([[0.0, 1.0], fpr])
    ys = np.concatenate([[0.0, 1.0], tpr])
    order = np.lexsort((ys, xs))
    return curve, float(np.trapezoid(ys[order], xs[order]))


def amoc(series: EvalSeries, thresholds=None, outbreak_intervals=None) -> tuple[Curve, float]:
    """Detection-delay vs false-alarm curve across thresholds.

    Per outbreak interval (inclusive day spans inside the window), the delay
    is first-alarm-day minus onset, capped at the interval length when the
    outbreak is never detected. The false-alarm rate is the fraction of
    quiet days with an alarm. The area uses the x-sorted trapezoid rule.
    """
    if not outbreak_intervals:
        raise InputError("amoc requires at least one outbreak interval")
    thr = default_thresholds(series.p_est) if thresholds is None else np.asarray(thresholds, float)
    in_outbreak = np.zeros(len(series.t), dtype=bool)
    for start, end in outbreak_intervals:
        in_outbreak |= (series.t >= start) & (series.t <= end)
    quiet_days = int((~in_outbreak).sum())
    fa_rate = np.empty(len(thr))
    mean_delay = np.empty(len(thr))
    for k, threshold in enumerate(thr):
        alarms = series.p_est > threshold
        fa_rate[k] = (alarms & ~in_outbreak).sum() / quiet_days if quiet_days else 0.0
        delays = []
        for start, end in outbreak_intervals:
            days = series.t[alarms & (series.t >= start) & (series.t <= end)]
            delays.append(int(days[0]) - start if len(days) else end - start + 1)
        mean_delay[k] = np.mean(delays)
    curve = Curve(thr, fa_rate, mean_delay, "false_alarm_rate", "mean_delay")
    order = np.lexsort((mean_delay, fa_rate))
    return curve, float(np.trapezoid(mean_delay[order], fa_rate[order]))


def intervals_from_regimes(t, regimes) -> list[tuple[int, int]]:
    """Contiguous runs of regime 1, as inclusive (start_day, end_day) spans."""
    t = np.asarray(t)
    r = np.asarray(regimes).astype(bool)
    out = []
    start = None
    for k in range(len(t)):
        if r[k] and start is None:
            start = int(t[k])
        if start is not None and (not r[k]):
            out.append((start, int(t[k - 1])))
            start = None
    if start is not None:
        out.append((start, int(t[-1])))
    return out


def summarize(runs: dict) -> dict:
    """Sample mean and sd (n-1 denominator) per metric over per-seed values."""
    out = {}
    for name, values in runs.items():
        values = np.asarray(values, dtype=float)
        if len(values) < 2:
            raise InputError(f"summarize needs >= 2 runs for {name}")
        out[name] = (float(values.mean()), float(values.std(ddof=1)))
    return out
