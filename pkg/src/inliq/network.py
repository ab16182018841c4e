"""Market state encoding over a threshold ladder and the transition replay.

The state is a binary vector b = (b_1, ..., b_n), bit i set when the
overshoot at scale i is moving up, packed little-endian into the integer
code s = sum b_i 2^(i-1).  A state may flip its first bit, or the lowest
bit disagreeing with it; the all-zero and all-one states (blind spots)
only have the first option.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from . import _kernels
from .dc import EventStream, merge_streams

TRANSITIONS_HEADER = "time_ms,from_state,to_state,trigger_threshold"


class ReplayError(ValueError):
    """Raised when event streams cannot be replayed into legal transitions."""


def encode_bits(bits) -> int:
    """Little-endian binary encoding: (1,0,1) -> 5."""
    s = 0
    for i, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError(f"bit {i} is {b}, expected 0 or 1")
        s |= int(b) << i
    return s


def decode_state(s: int, n: int) -> tuple:
    """Inverse of :func:`encode_bits` for an n-bit state."""
    if not 0 <= s < (1 << n):
        raise ValueError(f"state {s} out of range for n={n}")
    return tuple((s >> i) & 1 for i in range(n))


def far_bit(s: int, n: int) -> int:
    """Index (0-based) of the lowest bit disagreeing with bit 0, or -1.

    -1 identifies the blind spots 0 and 2^n - 1.
    """
    b1 = s & 1
    j = 0
    while j < n and ((s >> j) & 1) == b1:
        j += 1
    return -1 if j == n else j


def successor_codes(s: int, n: int) -> tuple:
    """Legal next states of ``s``: flip bit 0, and the far bit when present."""
    if not 0 <= s < (1 << n):
        raise ValueError(f"state {s} out of range for n={n}")
    j = far_bit(s, n)
    if j < 0:
        return (s ^ 1,)
    return (s ^ 1, s ^ (1 << j))


@dataclass(frozen=True)
class MarketState:
    """Binary market state with its numeric code."""

    bits: tuple
    n: int

    def __post_init__(self):
        if len(self.bits) != self.n:
            raise ValueError("bit vector length differs from n")
        encode_bits(self.bits)  # validates

    @property
    def code(self) -> int:
        return encode_bits(self.bits)

    @classmethod
    def from_code(cls, s: int, n: int) -> "MarketState":
        return cls(decode_state(s, n), n)


def successors(state: MarketState) -> set:
    """Set of reachable states (size 1 for blind spots, else 2)."""
    return {MarketState.from_code(c, state.n)
            for c in successor_codes(state.code, state.n)}


@dataclass(frozen=True)
class TransitionRecord:
    """A single observed state change, triggered by one threshold's DC."""

    from_state: int
    to_state: int
    time: int
    trigger_threshold: int


class TransitionLog:
    """Column-oriented sequence of transitions on an n-bit network."""

    def __init__(self, n: int, times, from_states, to_states, triggers):
        self.n = int(n)
        self.times = np.ascontiguousarray(times, dtype=np.int64)
        self.from_states = np.ascontiguousarray(from_states, dtype=np.int64)
        self.to_states = np.ascontiguousarray(to_states, dtype=np.int64)
        self.triggers = np.ascontiguousarray(triggers, dtype=np.int64)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k) -> TransitionRecord:
        return TransitionRecord(int(self.from_states[k]), int(self.to_states[k]),
                                int(self.times[k]), int(self.triggers[k]))

    def __iter__(self) -> Iterator[TransitionRecord]:
        for k in range(len(self)):
            yield self[k]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(TRANSITIONS_HEADER + "\n")
        for k in range(len(self)):
            out.write(f"{self.times[k]},{self.from_states[k]},"
                      f"{self.to_states[k]},{self.triggers[k]}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, n: int) -> "TransitionLog":
        lines = text.splitlines()
        if not lines or lines[0].strip() != TRANSITIONS_HEADER:
            raise ValueError(f"expected header '{TRANSITIONS_HEADER}'")
        rows = [tuple(int(v) for v in line.split(","))
                for line in lines[1:] if line.strip()]
        arr = np.array(rows, dtype=np.int64).reshape(-1, 4)
        return cls(n, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def replay(streams: Sequence[EventStream], n: Optional[int] = None,
           initial_state: Optional[int] = None) -> TransitionLog:
    """Merge per-threshold DC streams into a legal transition sequence.

    Streams merge by confirmation time with ties resolved smallest
    threshold first; each DC at threshold i sets bit i to its direction.
    By default the state seeds from the first confirmed DC per threshold
    and transitions before every threshold has confirmed are discarded;
    pass ``initial_state`` to start fully seeded (synthetic warm starts).

    Raises :class:`ReplayError` on a non-alternating stream or an event
    that is not a legal single-bit flip.
    """
    if n is None:
        n = len(streams)
    if len(streams) != n:
        raise ValueError(f"{len(streams)} streams for n={n}")
    times, thr, dirs = merge_streams(streams)
    if initial_state is None:
        state, known = 0, 0
    else:
        if not 0 <= initial_state < (1 << n):
            raise ValueError(f"initial_state {initial_state} out of range")
        state, known = int(initial_state), (1 << n) - 1
    cap = len(times)
    out_time = np.empty(cap, dtype=np.int64)
    out_from = np.empty(cap, dtype=np.int64)
    out_to = np.empty(cap, dtype=np.int64)
    out_trigger = np.empty(cap, dtype=np.int64)
    m, state, known, _, err = _kernels.replay_chunk(
        times, thr, dirs, n, state, known, 0,
        out_time, out_from, out_to, out_trigger)
    if err == 1:
        raise ReplayError("inconsistent stream: directional-change kinds do not alternate")
    if err == 2:
        raise ReplayError("event sequence produced an illegal state transition")
    return TransitionLog(n, out_time[:m].copy(), out_from[:m].copy(),
                         out_to[:m].copy(), out_trigger[:m].copy())
