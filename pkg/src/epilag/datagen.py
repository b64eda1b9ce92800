"""Ground-truth simulation and multi-stream measurement generation.

A simulated run places outbreak intervals (explicit or random), evolves the
chain-binomial SEIRS model with the transmission rate switched inside the
intervals, and emits per-sensor Poisson count measurements, possibly
received with a delay. The measurement stream is sorted by reception time
so it can be replayed directly into a measurement buffer.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field

import numpy as np

from . import rng as streams
from .exceptions import ConfigError, InputError
from .model import (LAMBDA_FLOOR, SeirsState, Theta, apply_flows,
                    seirs_flows_vec, transition_probs)

MIN_OUTBREAK_DAYS = 30
MAX_OUTBREAK_DAYS = 120
MIN_OUTBREAK_GAP = 30
_RANDOM_SCHEDULE = re.compile(r"^random\((\d+)\)$")


@dataclass(frozen=True)
class SensorConfig:
    """One measurement stream: a reading every `period` days, received
    `delay` days after generation."""

    sensor_id: int
    period: int
    delay: int

    def __post_init__(self):
        if self.period < 1:
            raise ConfigError(f"sensor {self.sensor_id}: period must be >= 1")
        if self.delay < 0:
            raise ConfigError(f"sensor {self.sensor_id}: delay must be >= 0")


# Daily on-time stream plus an every-3-days stream received 3 days late.
TWO_STREAM_SENSORS = (SensorConfig(1, 1, 0), SensorConfig(2, 3, 3))


@dataclass(frozen=True, order=True)
class Measurement:
    """A count y generated on day t_g and received on day t_r (t_r >= t_g).

    Ordering is (t_r, t_g, sensor): reception order with deterministic ties.
    """

    t_r: int
    t_g: int
    sensor: int
    y: int

    def __post_init__(self):
        if self.t_r < self.t_g:
            raise InputError(f"measurement received before generated: {self}")
        if self.y < 0:
            raise InputError(f"negative count: {self}")

    @property
    def key(self):
        return (self.sensor, self.t_g, self.t_r)

    @property
    def delay(self) -> int:
        return self.t_r - self.t_g


@dataclass(frozen=True)
class SimConfig:
    """Ground-truth simulation setup.

    regime_schedule is either a list of inclusive (start, end) day intervals,
    or the string "random(k)" for k randomly placed outbreaks after burn_in.
    An empty list means no outbreaks. Initial occupancy defaults to
    i0 = n_pop // 100 infectious and everyone else susceptible.
    """

    n_pop: int
    horizon: int
    burn_in: int
    theta_true: Theta
    regime_schedule: object = field(default_factory=list)
    seed: int = 0
    e0: int = 0
    i0: int | None = None
    r0: int = 0

    def __post_init__(self):
        if self.n_pop <= 0:
            raise ConfigError("n_pop must be positive")
        if not (0 <= self.burn_in < self.horizon):
            raise ConfigError(f"need 0 <= burn_in < horizon, got {self.burn_in}, {self.horizon}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        init = self.initial_state()
        if init.n_pop != self.n_pop:
            raise ConfigError("initial compartments exceed n_pop")
        if isinstance(self.regime_schedule, str):
            if not _RANDOM_SCHEDULE.match(self.regime_schedule):
                raise ConfigError(f"bad schedule spec {self.regime_schedule!r}")
        else:
            _validate_intervals(list(self.regime_schedule), self.horizon)

    def initial_state(self) -> SeirsState:
        i0 = self.n_pop // 100 if self.i0 is None else self.i0
        return SeirsState(self.n_pop - self.e0 - i0 - self.r0, self.e0, i0, self.r0)


def _validate_intervals(intervals, horizon):
    prev_end = None
    for start, end in sorted(intervals):
        if not (1 <= start <= end <= horizon):
            raise ConfigError(f"interval ({start}, {end}) outside [1, {horizon}]")
        if prev_end is not None and start <= prev_end:
            raise ConfigError("outbreak intervals overlap")
        prev_end = end


def random_outbreak_schedule(k: int, horizon: int, burn_in: int,
                             rng: np.random.Generator,
                             max_attempts: int = 1000) -> list[tuple[int, int]]:
    """Place k non-overlapping outbreak intervals after burn_in.

    Durations are uniform on [30, 120] days, intervals are separated by at
    least 30 days, and everything fits inside (burn_in, horizon]. Placement
    is rejection-sampled; an infeasible request raises ConfigError.
    """
    if k not in (1, 2):
        raise ConfigError(f"k={k} outbreaks unsupported (expected 1 or 2)")
    if horizon - burn_in < k * MIN_OUTBREAK_DAYS + (k - 1) * MIN_OUTBREAK_GAP:
        raise ConfigError(f"horizon - burn_in = {horizon - burn_in} too short for {k} outbreaks")
    for _ in range(max_attempts):
        durations = rng.integers(MIN_OUTBREAK_DAYS, MAX_OUTBREAK_DAYS + 1, size=k)
        if any(horizon - int(d) + 1 <= burn_in for d in durations):
            continue  # this duration draw cannot start after burn_in
        starts = [int(rng.integers(burn_in + 1, horizon - int(d) + 2)) for d in durations]
        intervals = sorted((s, s + int(d) - 1) for s, d in zip(starts, durations))
        ok = all(e <= horizon for _, e in intervals)
        for (s0, e0), (s1, _) in zip(intervals, intervals[1:]):
            ok = ok and (s1 - e0 >= MIN_OUTBREAK_GAP)
        if ok:
            return intervals
    raise ConfigError(f"could not place {k} outbreaks in ({burn_in}, {horizon}] "
                      f"after {max_attempts} attempts")


def resolve_schedule(config: SimConfig) -> list[tuple[int, int]]:
    """Materialise the outbreak intervals (drawing them if "random(k)")."""
    if isinstance(config.regime_schedule, str):
        k = int(_RANDOM_SCHEDULE.match(config.regime_schedule).group(1))
        rng = streams.substream(config.seed, streams.SIM_SCHEDULE)
        return random_outbreak_schedule(k, config.horizon, config.burn_in, rng)
    return sorted(tuple(iv) for iv in config.regime_schedule)


def regimes_from_intervals(intervals, horizon: int) -> np.ndarray:
    """Day-indexed regime indicator for days 1..horizon."""
    regimes = np.zeros(horizon, dtype=np.int8)
    for start, end in intervals:
        regimes[start - 1:end] = 1
    return regimes


def simulate_truth(config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Simulate (states, regimes) for days 1..horizon.

    states is (horizon, 4) int [S, E, I, R]; regimes is (horizon,) in {0, 1}.
    The transition into day t uses the regime of day t. Deterministic per
    config.seed.
    """
    intervals = resolve_schedule(config)
    regimes = regimes_from_intervals(intervals, config.horizon)
    rng = streams.substream(config.seed, streams.SIM_TRUTH)
    states = np.empty((config.horizon, 4), dtype=np.int64)
    current = config.initial_state().as_array()[None, :]
    for t in range(1, config.horizon + 1):
        probs = transition_probs(SeirsState.from_array(current[0]), config.theta_true,
                                 int(regimes[t - 1]), config.n_pop)
        flows = seirs_flows_vec(current, probs[None, :], rng)
        current = apply_flows(current, flows)
        states[t - 1] = current[0]
    return states, regimes


def generate_measurements(states: np.ndarray, sensors, rng: np.random.Generator,
                          lambda_floor: float = LAMBDA_FLOOR) -> list[Measurement]:
    """Poisson readings of the infectious count for each sensor schedule.

    For each sensor, generation days are 1, 1+period, ... with
    t_g + delay <= horizon (a reading that would arrive after the run ends
    is not emitted). Draw order is sensors in listed order, then t_g
    ascending. Output is sorted by (t_r, t_g, sensor).
    """
    if len(states) == 0:
        raise InputError("empty state trajectory")
    horizon = len(states)
    out = []
    for sensor in sensors:
        for t_g in range(1, horizon - sensor.delay + 1, sensor.period):
            lam = max(float(states[t_g - 1, 2]), lambda_floor)
            out.append(Measurement(t_r=t_g + sensor.delay, t_g=t_g,
                                   sensor=sensor.sensor_id, y=int(rng.poisson(lam))))
    return sorted(out)


# --- CSV interfaces (consumed by the CLI and the measurement buffer) ---

TRUTH_HEADER = ["t", "s", "e", "i", "r", "regime"]
MEASUREMENT_HEADER = ["sensor", "t_g", "t_r", "y"]


def _open_rows(path):
    """Yield CSV rows, skipping '#' comment lines."""
    with open(path, newline="") as fh:
        for row in csv.reader(line for line in fh if not line.startswith("#")):
            if row:
                yield row


def write_truth_csv(path, states: np.ndarray, regimes: np.ndarray,
                    comments: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for key, value in (comments or {}).items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        writer.writerow(TRUTH_HEADER)
        for t in range(len(states)):
            writer.writerow([t + 1, *map(int, states[t]), int(regimes[t])])


def read_truth_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (t, states, regimes) arrays."""
    rows = list(_open_rows(path))
    if not rows or rows[0] != TRUTH_HEADER:
        raise InputError(f"{path}: expected truth header {TRUTH_HEADER}")
    data = np.array([[int(v) for v in row] for row in rows[1:]], dtype=np.int64)
    if data.size == 0:
        raise InputError(f"{path}: empty truth file")
    return data[:, 0], data[:, 1:5], data[:, 5]


def write_measurements_csv(path, measurements, comments: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        for key, value in (comments or {}).items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        writer.writerow(MEASUREMENT_HEADER)
        for m in measurements:
            writer.writerow([m.sensor, m.t_g, m.t_r, m.y])


def read_measurements_csv(path) -> list[Measurement]:
    rows = list(_open_rows(path))
    if not rows or rows[0] != MEASUREMENT_HEADER:
        raise InputError(f"{path}: expected measurement header {MEASUREMENT_HEADER}")
    return [Measurement(sensor=int(r[0]), t_g=int(r[1]), t_r=int(r[2]), y=int(r[3]))
            for r in rows[1:]]


def simulate_dataset(config: SimConfig, sensors=TWO_STREAM_SENSORS):
    """Truth plus replayable measurement stream for one seed."""
    states, regimes = simulate_truth(config)
    measurements = generate_measurements(
        states, sensors, streams.substream(config.seed, streams.SIM_MEASURE))
    return states, regimes, measurements
