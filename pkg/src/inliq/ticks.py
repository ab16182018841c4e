"""Tick ingestion: CSV quote files to a validated, time-ordered midprice series."""

from __future__ import annotations

import gzip
import io
from dataclasses import dataclass, field

import numpy as np

HEADER = "timestamp_ms,bid,ask"
GZIP_MAGIC = b"\x1f\x8b"


class TickDataError(ValueError):
    """Raised when tick input violates the format or its invariants."""


@dataclass(frozen=True)
class Tick:
    """One bid/ask quote at integer milliseconds since epoch."""

    timestamp: int
    bid: float
    ask: float

    def __post_init__(self):
        if self.bid <= 0 or self.ask <= 0:
            raise TickDataError(f"non-positive price: bid={self.bid} ask={self.ask}")
        if self.bid > self.ask:
            raise TickDataError(f"bid {self.bid} exceeds ask {self.ask}")

    @property
    def mid(self) -> float:
        return midprice(self)


def midprice(tick: Tick) -> float:
    """Arithmetic mean of bid and ask."""
    return (tick.bid + tick.ask) / 2.0


@dataclass
class PriceSeries:
    """Column-oriented tick series; timestamps non-decreasing, prices valid.

    Ticks with equal timestamps are legal (quote bursts) and keep their
    input order.
    """

    times: np.ndarray
    bids: np.ndarray
    asks: np.ndarray
    instrument: str = ""
    mids: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.times = np.ascontiguousarray(self.times, dtype=np.int64)
        self.bids = np.ascontiguousarray(self.bids, dtype=np.float64)
        self.asks = np.ascontiguousarray(self.asks, dtype=np.float64)
        if not (len(self.times) == len(self.bids) == len(self.asks)):
            raise TickDataError("column length mismatch")
        if len(self.times) == 0:
            raise TickDataError("empty tick series")
        if np.any(self.bids <= 0) or np.any(self.asks <= 0):
            raise TickDataError("non-positive price in series")
        if np.any(self.bids > self.asks):
            raise TickDataError("bid exceeds ask in series")
        if np.any(np.diff(self.times) < 0):
            raise TickDataError("timestamps decrease in series")
        self.mids = (self.bids + self.asks) / 2.0

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k) -> Tick:
        return Tick(int(self.times[k]), float(self.bids[k]), float(self.asks[k]))

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    @classmethod
    def from_mid(cls, times, mids, instrument: str = "") -> "PriceSeries":
        """Series with zero spread (bid = ask = mid)."""
        mids = np.asarray(mids, dtype=np.float64)
        return cls(np.asarray(times, dtype=np.int64), mids, mids.copy(), instrument)


def parse_ticks(source, instrument: str = "") -> PriceSeries:
    """Parse CSV tick data (header ``timestamp_ms,bid,ask``) from bytes or a stream.

    Gzip-compressed input is detected by magic bytes.  Rows are validated
    one by one: malformed fields, a decreasing timestamp, bid > ask or a
    non-positive price raise :class:`TickDataError` with the offending
    line number.  Out-of-order rows are rejected, never silently sorted.
    """
    if isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    elif hasattr(source, "read"):
        raw = source.read()
        if isinstance(raw, str):
            raw = raw.encode("utf-8")
    else:
        raise TypeError("source must be bytes or a binary stream")
    if raw[:2] == GZIP_MAGIC:
        raw = gzip.decompress(raw)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TickDataError(f"input is not UTF-8: {exc}") from None

    lines = text.splitlines()
    if not lines:
        raise TickDataError("empty input")
    if lines[0].strip() != HEADER:
        raise TickDataError(f"line 1: expected header '{HEADER}', got '{lines[0].strip()}'")

    times, bids, asks = [], [], []
    prev = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise TickDataError(f"line {lineno}: expected 3 fields, got {len(parts)}")
        try:
            t = int(parts[0])
            bid = float(parts[1])
            ask = float(parts[2])
        except ValueError:
            raise TickDataError(f"line {lineno}: malformed row '{line}'") from None
        if bid <= 0 or ask <= 0:
            raise TickDataError(f"line {lineno}: non-positive price")
        if bid > ask:
            raise TickDataError(f"line {lineno}: bid {bid} exceeds ask {ask}")
        if prev is not None and t < prev:
            raise TickDataError(f"line {lineno}: timestamp {t} decreases (previous {prev})")
        prev = t
        times.append(t)
        bids.append(bid)
        asks.append(ask)
    if not times:
        raise TickDataError("no data rows")
    return PriceSeries(np.array(times, dtype=np.int64),
                       np.array(bids), np.array(asks), instrument)


def load_ticks(path, instrument: str = "") -> PriceSeries:
    """Read a tick CSV file, transparently handling gzip."""
    with open(path, "rb") as fh:
        return parse_ticks(fh, instrument=instrument)


def serialize_ticks(series: PriceSeries) -> str:
    """Render a series back to CSV; floats use shortest round-trip repr."""
    out = io.StringIO()
    out.write(HEADER + "\n")
    for k in range(len(series)):
        out.write(f"{series.times[k]},{float(series.bids[k])!r},"
                  f"{float(series.asks[k])!r}\n")
    return out.getvalue()
