"""Directional-change engine: dissect a midprice series into DC/overshoot events.

A runner per threshold tracks the running extremum; a relative reversal of
at least ``delta`` against it confirms a directional change, flips the
expected direction and starts the next overshoot.  Events carry the
amplitude and duration of the overshoot that ended at the extremum the
confirmation was measured from.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from . import _kernels
from .ticks import PriceSeries

EVENTS_HEADER = ("threshold_index,kind,confirm_time_ms,confirm_price,"
                 "overshoot_amplitude,overshoot_duration_ms")


@dataclass(frozen=True)
class ThresholdLadder:
    """Strictly increasing relative directional-change thresholds."""

    deltas: tuple

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.deltas)
        object.__setattr__(self, "deltas", deltas)
        if len(deltas) < 1:
            raise ValueError("ladder needs at least one threshold")
        if any(d <= 0 for d in deltas):
            raise ValueError("thresholds must be positive")
        if any(b <= a for a, b in zip(deltas, deltas[1:])):
            raise ValueError("thresholds must be strictly increasing")

    def __len__(self):
        return len(self.deltas)

    def __getitem__(self, k) -> float:
        return self.deltas[k]

    @property
    def n(self) -> int:
        return len(self.deltas)

    def ratios(self) -> np.ndarray:
        """Successive ratios delta_k / delta_{k-1}."""
        d = np.asarray(self.deltas)
        return d[1:] / d[:-1]

    def scaled(self, factor: float) -> "ThresholdLadder":
        return ThresholdLadder(tuple(d * factor for d in self.deltas))

    def tail(self) -> "ThresholdLadder":
        """Ladder with the smallest threshold removed."""
        if len(self.deltas) < 2:
            raise ValueError("cannot drop the only threshold")
        return ThresholdLadder(self.deltas[1:])

    @classmethod
    def geometric(cls, delta1: float, n: int, ratio: float) -> "ThresholdLadder":
        if ratio <= 1.0:
            raise ValueError("geometric ratio must exceed 1")
        return cls(tuple(delta1 * ratio ** k for k in range(n)))

    @classmethod
    def doubling(cls, delta1: float, n: int) -> "ThresholdLadder":
        return cls.geometric(delta1, n, 2.0)


@dataclass(frozen=True)
class RunnerState:
    """State of one threshold's runner between ticks.

    ``mode`` names the direction of the move that would confirm next
    ("up" = a rise of delta from the running minimum confirms an up DC).
    """

    mode: str
    extreme: float
    extreme_time: int
    last_dc_price: float = math.nan
    last_dc_time: int = -1

    @property
    def has_confirmed(self) -> bool:
        return not math.isnan(self.last_dc_price)


@dataclass(frozen=True)
class IntrinsicEvent:
    """A confirmed directional change at one threshold."""

    threshold_index: int
    kind: str  # "up" or "down"
    confirm_time: int
    confirm_price: float
    overshoot_amplitude: Optional[float]  # signed relative move, None for the first event
    overshoot_duration: Optional[int]  # milliseconds


def runner_step(state: RunnerState, delta: float, price: float, time_ms: int,
                threshold_index: int = 0):
    """Advance one runner by one tick; total function, never raises.

    Returns (new_state, event_or_None).  The emitted event carries the
    completed preceding overshoot: the signed relative move from the last
    confirmation price to the extremum this confirmation was measured
    from (None on the first confirmation ever).
    """
    if state.mode == "up":
        if price < state.extreme:
            return RunnerState("up", price, time_ms, state.last_dc_price,
                               state.last_dc_time), None
        if price / state.extreme - 1.0 >= delta:
            if state.has_confirmed:
                amp = state.extreme / state.last_dc_price - 1.0
                dur = state.extreme_time - state.last_dc_time
            else:
                amp = None
                dur = None
            event = IntrinsicEvent(threshold_index, "up", time_ms, price, amp, dur)
            return RunnerState("down", price, time_ms, price, time_ms), event
        return state, None
    else:
        if price > state.extreme:
            return RunnerState("down", price, time_ms, state.last_dc_price,
                               state.last_dc_time), None
        if price / state.extreme - 1.0 <= -delta:
            if state.has_confirmed:
                amp = state.extreme / state.last_dc_price - 1.0
                dur = state.extreme_time - state.last_dc_time
            else:
                amp = None
                dur = None
            event = IntrinsicEvent(threshold_index, "down", time_ms, price, amp, dur)
            return RunnerState("up", price, time_ms, price, time_ms), event
        return state, None


class EventStream:
    """Events of one threshold, column-oriented.

    ``dirs`` holds 1 for up confirmations and 0 for down; overshoot
    amplitude is NaN and duration -1 where no completed overshoot exists
    (a stream's first event).
    """

    def __init__(self, threshold_index: int, times, prices, dirs, amps, durs):
        self.threshold_index = int(threshold_index)
        self.times = np.ascontiguousarray(times, dtype=np.int64)
        self.prices = np.ascontiguousarray(prices, dtype=np.float64)
        self.dirs = np.ascontiguousarray(dirs, dtype=np.int8)
        self.amps = np.ascontiguousarray(amps, dtype=np.float64)
        self.durs = np.ascontiguousarray(durs, dtype=np.int64)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k) -> IntrinsicEvent:
        amp = self.amps[k]
        return IntrinsicEvent(
            self.threshold_index,
            "up" if self.dirs[k] == 1 else "down",
            int(self.times[k]),
            float(self.prices[k]),
            None if np.isnan(amp) else float(amp),
            None if self.durs[k] < 0 else int(self.durs[k]),
        )

    def __iter__(self) -> Iterator[IntrinsicEvent]:
        for k in range(len(self)):
            yield self[k]

    def overshoots(self, discard: int = 0) -> np.ndarray:
        """Completed overshoot amplitudes, skipping the first ``discard`` events."""
        amps = self.amps[discard:]
        return amps[~np.isnan(amps)]


class StreamingDissector:
    """Incremental dissection for paths too long to hold in memory.

    Feed chunks of (times, prices); collect per-threshold events at the
    end.  Equivalent to running :func:`dissect` over the concatenation.
    """

    def __init__(self, ladder: ThresholdLadder, initial_mode: str = "up"):
        if initial_mode not in ("up", "down"):
            raise ValueError("initial_mode must be 'up' or 'down'")
        self.ladder = ladder
        self._mode = [1 if initial_mode == "up" else 0] * ladder.n
        self._ext = [math.nan] * ladder.n
        self._ext_time = [0] * ladder.n
        self._last_price = [0.0] * ladder.n
        self._last_time = [0] * ladder.n
        self._have_prev = [False] * ladder.n
        self._chunks = [[] for _ in range(ladder.n)]

    def event_count(self, i: int = None) -> int:
        """Events emitted so far, for threshold i or in total."""
        which = range(self.ladder.n) if i is None else (i,)
        return sum(len(c[0]) for k in which for c in self._chunks[k])

    def feed(self, times, prices):
        times = np.ascontiguousarray(times, dtype=np.int64)
        prices = np.ascontiguousarray(prices, dtype=np.float64)
        if len(times) == 0:
            return
        cap = len(times)
        for i, delta in enumerate(self.ladder.deltas):
            if math.isnan(self._ext[i]):
                self._ext[i] = prices[0]
                self._ext_time[i] = int(times[0])
            out_dir = np.empty(cap, dtype=np.int8)
            out_time = np.empty(cap, dtype=np.int64)
            out_price = np.empty(cap, dtype=np.float64)
            out_amp = np.empty(cap, dtype=np.float64)
            out_dur = np.empty(cap, dtype=np.int64)
            (m, self._mode[i], self._ext[i], self._ext_time[i],
             self._last_price[i], self._last_time[i], self._have_prev[i]) = \
                _kernels.dissect_chunk(
                    times, prices, delta, self._mode[i], self._ext[i],
                    self._ext_time[i], self._last_price[i], self._last_time[i],
                    self._have_prev[i], out_dir, out_time, out_price,
                    out_amp, out_dur)
            if m:
                self._chunks[i].append((out_time[:m].copy(), out_price[:m].copy(),
                                        out_dir[:m].copy(), out_amp[:m].copy(),
                                        out_dur[:m].copy()))

    def streams(self) -> list:
        out = []
        for i in range(self.ladder.n):
            parts = self._chunks[i]
            if parts:
                times = np.concatenate([p[0] for p in parts])
                prices = np.concatenate([p[1] for p in parts])
                dirs = np.concatenate([p[2] for p in parts])
                amps = np.concatenate([p[3] for p in parts])
                durs = np.concatenate([p[4] for p in parts])
            else:
                times = np.empty(0, dtype=np.int64)
                prices = np.empty(0, dtype=np.float64)
                dirs = np.empty(0, dtype=np.int8)
                amps = np.empty(0, dtype=np.float64)
                durs = np.empty(0, dtype=np.int64)
            out.append(EventStream(i, times, prices, dirs, amps, durs))
        return out


def dissect(series: PriceSeries, ladder: ThresholdLadder,
            initial_mode: str = "up") -> list:
    """Dissect a midprice series into one event stream per threshold.

    Runners are independent, so stream i equals running
    :func:`runner_step` with delta_i over every tick.  Deterministic:
    identical input bytes give identical streams.
    """
    if len(series) == 0:
        raise ValueError("empty series")
    d = StreamingDissector(ladder, initial_mode=initial_mode)
    d.feed(series.times, series.mids)
    return d.streams()


def merge_streams(streams: Sequence[EventStream]):
    """Interleave event streams by (confirmation time, threshold index).

    Returns (times, thresholds, directions) arrays; the ordering is the
    canonical serialization for state replay: simultaneous confirmations
    resolve smallest threshold first.
    """
    times = np.concatenate([s.times for s in streams])
    thr = np.concatenate([np.full(len(s), s.threshold_index, dtype=np.int64)
                          for s in streams])
    dirs = np.concatenate([s.dirs.astype(np.int64) for s in streams])
    order = np.lexsort((thr, times))
    return times[order], thr[order], dirs[order]


def events_to_csv(streams: Sequence[EventStream]) -> str:
    """Serialize streams merged by (time, threshold); full-precision floats."""
    times = np.concatenate([s.times for s in streams])
    thr = np.concatenate([np.full(len(s), s.threshold_index, dtype=np.int64)
                          for s in streams])
    rows = np.concatenate([np.arange(len(s), dtype=np.int64) for s in streams])
    order = np.lexsort((thr, times))
    out = io.StringIO()
    out.write(EVENTS_HEADER + "\n")
    for idx in order:
        s = streams[thr[idx]]
        k = rows[idx]
        amp = s.amps[k]
        dur = s.durs[k]
        amp_s = "" if np.isnan(amp) else repr(float(amp))
        dur_s = "" if dur < 0 else str(int(dur))
        kind = "up" if s.dirs[k] == 1 else "down"
        out.write(f"{s.threshold_index},{kind},{s.times[k]},"
                  f"{float(s.prices[k])!r},{amp_s},{dur_s}\n")
    return out.getvalue()


def events_from_csv(text: str) -> list:
    """Parse an events CSV back into per-threshold streams."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != EVENTS_HEADER:
        raise ValueError(f"expected header '{EVENTS_HEADER}'")
    rows = []
    max_thr = -1
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise ValueError(f"line {lineno}: expected 6 fields")
        i = int(parts[0])
        if parts[1] not in ("up", "down"):
            raise ValueError(f"line {lineno}: bad kind '{parts[1]}'")
        d = 1 if parts[1] == "up" else 0
        t = int(parts[2])
        price = float(parts[3])
        amp = math.nan if parts[4] == "" else float(parts[4])
        dur = -1 if parts[5] == "" else int(parts[5])
        rows.append((i, t, price, d, amp, dur))
        max_thr = max(max_thr, i)
    streams = []
    for i in range(max_thr + 1):
        mine = [r for r in rows if r[0] == i]
        streams.append(EventStream(
            i,
            np.array([r[1] for r in mine], dtype=np.int64),
            np.array([r[2] for r in mine]),
            np.array([r[3] for r in mine], dtype=np.int8),
            np.array([r[4] for r in mine]),
            np.array([r[5] for r in mine], dtype=np.int64),
        ))
    return streams
