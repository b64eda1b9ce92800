"""Reception-ordered measurement store with lag-window queries.

The buffer answers "which measurements are attributable to generation day
tau, as seen from wall-clock day t with lag l": exactly those with
t - l <= t_g <= tau <= t and t_r <= t. A measurement whose delay exceeds
every queried lag can never enter a window; it is counted in `dropped` the
first time a query excludes it, which surfaces mis-set lags without
aborting the run.
"""

from __future__ import annotations

from bisect import bisect_right

from .datagen import Measurement, read_measurements_csv
from .exceptions import IngestionError, InputError


class MeasurementBuffer:
    def __init__(self):
        self._by_tg: dict[int, list[Measurement]] = {}
        self._by_tr: dict[int, list[Measurement]] = {}
        self._tr_days: list[int] = []          # sorted reception days
        self._keys: set[tuple] = set()
        self._dropped_keys: set[tuple] = set()
        self._drop_cursor: dict[int, int] = {}   # lag -> index into _tr_days
        self._window_cache: dict[tuple, dict] = {}
        self.watermark = 0
        self.dropped = 0

    def __len__(self):
        return len(self._keys)

    def all_measurements(self):
        for day in self._tr_days:
            yield from self._by_tr[day]

    def ingest(self, m: Measurement) -> None:
        """Store one measurement; duplicates of (sensor, t_g, t_r) are rejected."""
        if m.key in self._keys:
            raise IngestionError(f"duplicate measurement {m.key}")
        scanned_through = {lag: (self._tr_days[idx - 1] if idx > 0 else 0)
                           for lag, idx in self._drop_cursor.items()}
        self._keys.add(m.key)
        self._by_tg.setdefault(m.t_g, []).append(m)
        if m.t_r not in self._by_tr:
            self._by_tr[m.t_r] = []
            pos = bisect_right(self._tr_days, m.t_r)
            self._tr_days.insert(pos, m.t_r)
            for lag, idx in self._drop_cursor.items():
                if pos < idx:
                    self._drop_cursor[lag] = idx + 1
        self._by_tr[m.t_r].append(m)
        self.watermark = max(self.watermark, m.t_r)
        self._window_cache.clear()
        # late ingest behind an already-scanned day: judge this one now
        for lag, day in scanned_through.items():
            if m.t_r <= day and m.delay > lag and m.key not in self._dropped_keys:
                self._dropped_keys.add(m.key)
                self.dropped += 1

    def _mark_dropped(self, t: int, lag: int) -> None:
        # A received measurement whose delay exceeds the lag never fits any
        # window; count it the first time a query finds its reception passed.
        # Each reception-day bucket is scanned once per lag via a cursor.
        idx = self._drop_cursor.get(lag, 0)
        while idx < len(self._tr_days) and self._tr_days[idx] <= t:
            for m in self._by_tr[self._tr_days[idx]]:
                if m.delay > lag and m.key not in self._dropped_keys:
                    self._dropped_keys.add(m.key)
                    self.dropped += 1
            idx += 1
        if idx > self._drop_cursor.get(lag, 0):
            self._drop_cursor[lag] = idx

    def window(self, t: int, lag: int) -> dict[int, list[Measurement]]:
        """Measurements usable at wall-clock day t, grouped by generation day.

        Keys are tau in [max(1, t - lag), t]; values are the measurements with
        t_g = tau and t_r <= t, sorted by (t_r, t_g, sensor). Days with no
        usable measurement are omitted. Results are cached until the next
        ingest, so replaying many filters over one buffer stays cheap.
        """
        if t < 1 or lag < 0:
            raise InputError(f"window requires t >= 1 and lag >= 0, got t={t}, lag={lag}")
        self._mark_dropped(t, lag)
        cached = self._window_cache.get((t, lag))
        if cached is not None:
            return cached
        out: dict[int, list[Measurement]] = {}
        for tau in range(max(1, t - lag), t + 1):
            usable = [m for m in self._by_tg.get(tau, ()) if m.t_r <= t]
            if usable:
                out[tau] = sorted(usable)
        self._window_cache[(t, lag)] = out
        return out

    def newly_visible(self, t: int, lag: int) -> list[Measurement]:
        """The subset of window(t, lag) received exactly on day t."""
        win = self.window(t, lag)
        return [m for ms in win.values() for m in ms if m.t_r == t]

    @staticmethod
    def from_measurements(measurements) -> "MeasurementBuffer":
        buf = MeasurementBuffer()
        for m in measurements:
            buf.ingest(m)
        return buf

    @staticmethod
    def from_csv(path) -> "MeasurementBuffer":
        return MeasurementBuffer.from_measurements(read_measurements_csv(path))
