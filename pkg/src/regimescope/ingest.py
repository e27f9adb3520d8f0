"""Tick-to-bar aggregation and movement series derivation.

Raw ticks are collapsed onto fixed half-hour (configurable) bar ends using
a last-tick-at-or-before rule; bars without a new tick carry the previous
bar's value within the same session, and consecutive sessions abut directly
with no overnight interpolation.  Movements are plain differences (normal
model) or log differences (lognormal model).
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    BadInputError,
    BadTickError,
    BadValueError,
    EmptyDataError,
    TooShortError,
)

UTC = dt.timezone.utc


class Model(str, Enum):
    NORMAL = "normal"
    LOGNORMAL = "lognormal"


@dataclass(frozen=True)
class Tick:
    timestamp: dt.datetime
    price: float


@dataclass(frozen=True)
class TradingCalendar:
    """Session times interpreted as UTC times of day."""

    session_open: dt.time = dt.time(9, 30)
    session_close: dt.time = dt.time(16, 0)
    bar_width: dt.timedelta = dt.timedelta(minutes=30)
    holidays: frozenset = frozenset()
    truncate_final: bool = False

    def __post_init__(self):
        if self.session_open >= self.session_close:
            raise ValueError("session_open must precede session_close")
        if self.bar_width <= dt.timedelta(0):
            raise ValueError("bar_width must be positive")

    @property
    def session_seconds(self) -> int:
        open_s = self.session_open.hour * 3600 + self.session_open.minute * 60
        close_s = self.session_close.hour * 3600 + self.session_close.minute * 60
        return close_s - open_s

    @property
    def bars_per_session(self) -> int:
        full = self.session_seconds // int(self.bar_width.total_seconds())
        extra = 1 if self.truncate_final and self.session_seconds % int(self.bar_width.total_seconds()) else 0
        return int(full + extra)

    def bar_ends(self, day: dt.date) -> list[dt.datetime]:
        open_dt = dt.datetime.combine(day, self.session_open, tzinfo=UTC)
        close_dt = dt.datetime.combine(day, self.session_close, tzinfo=UTC)
        ends = []
        cursor = open_dt + self.bar_width
        while cursor <= close_dt:
            ends.append(cursor)
            cursor += self.bar_width
        if self.truncate_final and (not ends or ends[-1] < close_dt):
            ends.append(close_dt)
        return ends


@dataclass(frozen=True, eq=False)
class BarSeries:
    timestamps: tuple
    values: np.ndarray
    bars_per_day: int

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class MovementSeries:
    model: Model
    values: np.ndarray
    source_timestamps: tuple
    bars_per_day: int
    series_start: dt.datetime | None = None

    def __len__(self) -> int:
        return len(self.values)


def _ensure_utc(ts: dt.datetime) -> dt.datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=UTC)
    return ts.astimezone(UTC)


def aggregate_ticks(ticks: list[Tick], calendar: TradingCalendar | None = None) -> BarSeries:
    """Collapse ticks to one bar per bar-end instant inside each session.

    Bar value is the price of the last tick at or before the bar end.
    Leading bars before the first tick of a session are omitted, as are
    sessions with no ticks and days in the holiday set.  Ticks outside
    session hours are ignored.
    """
    calendar = calendar or TradingCalendar()
    if not ticks:
        raise EmptyDataError("no ticks to aggregate")

    prev = None
    for i, tick in enumerate(ticks):
        if tick.price <= 0:
            raise BadTickError(i, f"non-positive price {tick.price} at index {i}")
        ts = _ensure_utc(tick.timestamp)
        if prev is not None and ts < prev:
            raise BadTickError(i, f"ticks not sorted at index {i}")
        prev = ts

    by_day: dict[dt.date, list[Tick]] = {}
    for tick in ticks:
        ts = _ensure_utc(tick.timestamp)
        by_day.setdefault(ts.date(), []).append(Tick(ts, tick.price))

    timestamps: list[dt.datetime] = []
    values: list[float] = []
    for day in sorted(by_day):
        if day in calendar.holidays:
            continue
        open_dt = dt.datetime.combine(day, calendar.session_open, tzinfo=UTC)
        close_dt = dt.datetime.combine(day, calendar.session_close, tzinfo=UTC)
        session_ticks = [
            t for t in by_day[day] if open_dt <= t.timestamp <= close_dt
        ]
        if not session_ticks:
            continue
        pos = 0
        last_price = None
        for bar_end in calendar.bar_ends(day):
            while pos < len(session_ticks) and session_ticks[pos].timestamp <= bar_end:
                last_price = session_ticks[pos].price
                pos += 1
            if last_price is None:
                continue  # no tick since session open yet
            timestamps.append(bar_end)
            values.append(last_price)

    if not values:
        raise EmptyDataError("no in-session ticks")
    return BarSeries(
        timestamps=tuple(timestamps),
        values=np.asarray(values, dtype=np.float64),
        bars_per_day=calendar.bars_per_session,
    )


def movements(bars: BarSeries, model: Model | str = Model.NORMAL) -> MovementSeries:
    """Differenced series: plain differences or log differences."""
    model = Model(model)
    if len(bars) < 2:
        raise TooShortError("need at least 2 bars to compute movements")
    x = np.asarray(bars.values, dtype=np.float64)
    if model is Model.LOGNORMAL:
        bad = np.nonzero(x <= 0)[0]
        if bad.size:
            raise BadValueError(int(bad[0]), f"non-positive value at bar {int(bad[0])}")
        z = np.diff(np.log(x))
    else:
        z = np.diff(x)
    return MovementSeries(
        model=model,
        values=z,
        source_timestamps=tuple(bars.timestamps[1:]),
        bars_per_day=bars.bars_per_day,
        series_start=bars.timestamps[0],
    )


# ---------------------------------------------------------------------------
# CSV interfaces: ticks are `timestamp,price`, bars are `timestamp,value`.


def _parse_timestamp(raw: str, line: int) -> dt.datetime:
    try:
        ts = dt.datetime.fromisoformat(raw.strip().replace("Z", "+00:00"))
    except ValueError as exc:
        raise BadInputError(f"line {line}: bad timestamp {raw!r}") from exc
    return _ensure_utc(ts)


def format_timestamp(ts: dt.datetime) -> str:
    return _ensure_utc(ts).isoformat().replace("+00:00", "Z")


def read_ticks_csv(path: str | Path) -> list[Tick]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataError(f"{path}: empty file")
        if [h.strip().lower() for h in header[:2]] != ["timestamp", "price"]:
            raise BadInputError(f"{path}: expected header timestamp,price")
        ticks = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                price = float(row[1])
            except (IndexError, ValueError) as exc:
                raise BadInputError(f"{path} line {line}: bad row {row!r}") from exc
            ticks.append(Tick(_parse_timestamp(row[0], line), price))
    if not ticks:
        raise EmptyDataError(f"{path}: no data rows")
    ticks.sort(key=lambda t: t.timestamp)
    return ticks


def write_bars_csv(bars: BarSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "value"])
        for ts, v in zip(bars.timestamps, bars.values):
            writer.writerow([format_timestamp(ts), repr(float(v))])


def read_bars_csv(path: str | Path, bars_per_day: int = 13) -> BarSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyDataError(f"{path}: empty file")
        if [h.strip().lower() for h in header[:2]] != ["timestamp", "value"]:
            raise BadInputError(f"{path}: expected header timestamp,value")
        timestamps = []
        values = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values.append(float(row[1]))
            except (IndexError, ValueError) as exc:
                raise BadInputError(f"{path} line {line}: bad row {row!r}") from exc
            timestamps.append(_parse_timestamp(row[0], line))
    if not values:
        raise EmptyDataError(f"{path}: no data rows")
    order = sorted(range(len(timestamps)), key=lambda i: timestamps[i])
    return BarSeries(
        timestamps=tuple(timestamps[i] for i in order),
        values=np.asarray([values[i] for i in order], dtype=np.float64),
        bars_per_day=bars_per_day,
    )


def parse_bars_csv_text(text: str, bars_per_day: int = 13) -> BarSeries:
    """Parse bar CSV from an in-memory string (service upload path)."""
    import io

    lines = text.splitlines()
    if not lines:
        raise EmptyDataError("empty bar CSV")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header[:2]] != ["timestamp", "value"]:
        raise BadInputError("expected header timestamp,value")
    timestamps = []
    values = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            values.append(float(row[1]))
        except (IndexError, ValueError) as exc:
            raise BadInputError(f"line {line}: bad row {row!r}") from exc
        timestamps.append(_parse_timestamp(row[0], line))
    if not values:
        raise EmptyDataError("no data rows")
    order = sorted(range(len(timestamps)), key=lambda i: timestamps[i])
    return BarSeries(
        timestamps=tuple(timestamps[i] for i in order),
        values=np.asarray([values[i] for i in order], dtype=np.float64),
        bars_per_day=bars_per_day,
    )
