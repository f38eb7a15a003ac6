"""Minute-bar ingestion and historical return windows.

Raw OHLCV files arrive with vendor-specific column orders, delimiters and
date formats; ingestion normalizes them into validated, strictly
time-ordered MinuteBar lists and reports every bad row with its line
number. Return windows are cut from the close column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from enum import Enum

import numpy as np

from .errors import InputError, ParseError, ValidationError
from .series import Boundary, Historical, ReturnsSeries

DEFAULT_COLUMNS = ("date", "time", "open", "high", "low", "close", "volume")
_FIELDS = {"date", "time", "datetime", "open", "high", "low", "close", "volume", "skip"}

_DATE_FORMATS = ("%Y-%m-%d", "%Y%m%d", "%m/%d/%Y", "%d.%m.%Y")
_TIME_FORMATS = ("%H:%M:%S", "%H:%M", "%H%M%S", "%H%M")
_DATETIME_FORMATS = ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%Y%m%d %H%M%S",
                     "%Y-%m-%dT%H:%M:%S")


@dataclass(frozen=True)
class MinuteBar:
    timestamp: datetime
    open: float
    high: float
    low: float
    close: float
    volume: int


def _parse_first(value: str, formats) -> datetime:
    for fmt in formats:
        try:
            return datetime.strptime(value, fmt)
        except ValueError:
            continue
    raise ValueError(f"unrecognized date/time {value!r}")


def _parse_row(cells, column_map) -> MinuteBar:
    if len(cells) < len(column_map):
        raise ValueError(f"expected {len(column_map)} columns, got {len(cells)}")
    parts: dict[str, str] = {}
    for name, cell in zip(column_map, cells):
        if name != "skip":
            parts[name] = cell.strip()
    if "datetime" in parts:
        ts = _parse_first(parts["datetime"], _DATETIME_FORMATS)
    else:
        date = _parse_first(parts["date"], _DATE_FORMATS)
        t = _parse_first(parts["time"], _TIME_FORMATS)
        ts = datetime.combine(date.date(), t.time())
    o = float(parts["open"])
    h = float(parts["high"])
    lo = float(parts["low"])
    c = float(parts["close"])
    vol = int(float(parts["volume"])) if "volume" in parts else 0
    return MinuteBar(timestamp=ts, open=o, high=h, low=lo, close=c, volume=vol)


def _validate_bar(bar: MinuteBar) -> str | None:
    for name in ("open", "high", "low", "close"):
        if not getattr(bar, name) > 0:
            return f"nonpositive {name} {getattr(bar, name)!r}"
    if bar.low > min(bar.open, bar.close) or max(bar.open, bar.close) > bar.high:
        return f"OHLC ordering violated (o={bar.open} h={bar.high} l={bar.low} c={bar.close})"
    if bar.volume < 0:
        return f"negative volume {bar.volume}"
    return None


def _sniff_delimiter(line: str) -> str:
    return ";" if line.count(";") > line.count(",") else ","


def scan_minutes(path, column_map=DEFAULT_COLUMNS, delimiter: str | None = None,
                 has_header: bool | None = None):
    """Parse a bar file into (bars, problems).

    problems is a list of (line_number, kind, message) with kind "parse" or
    "validation"; every input row lands in exactly one of the two outputs.
    """
    column_map = tuple(column_map)
    unknown = set(column_map) - _FIELDS
    if unknown:
        raise InputError(f"unknown column names {sorted(unknown)}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first:
            return [], []
        delim = delimiter or _sniff_delimiter(first)
        fh.seek(0)
        reader = csv.reader(fh, delimiter=delim)
        rows = [(i + 1, row) for i, row in enumerate(reader) if row and any(c.strip() for c in row)]

    if not rows:
        return [], []
    if has_header is None:
        try:
            _parse_row(rows[0][1], column_map)
            has_header = False
        except (ValueError, KeyError):
            has_header = True
    if has_header:
        rows = rows[1:]

    bars: list[MinuteBar] = []
    problems: list[tuple[int, str, str]] = []
    last_ts = None
    for lineno, row in rows:
        try:
            bar = _parse_row(row, column_map)
        except (ValueError, KeyError) as exc:
            problems.append((lineno, "parse", str(exc)))
            continue
        msg = _validate_bar(bar)
        if msg is None and last_ts is not None and bar.timestamp <= last_ts:
            msg = f"timestamp {bar.timestamp} not after previous {last_ts}"
        if msg is not None:
            problems.append((lineno, "validation", msg))
            continue
        last_ts = bar.timestamp
        bars.append(bar)
    return bars, problems


def ingest_minutes(path, column_map=DEFAULT_COLUMNS, delimiter: str | None = None,
                   has_header: bool | None = None) -> list[MinuteBar]:
    """Strict ingestion: any bad row raises with its line number."""
    bars, problems = scan_minutes(path, column_map, delimiter, has_header)
    if problems:
        lineno, kind, msg = problems[0]
        text = f"{path}: line {lineno}: {msg}" + (
            f" (+{len(problems) - 1} more bad rows)" if len(problems) > 1 else "")
        raise (ParseError if kind == "parse" else ValidationError)(text)
    return bars


def write_bars(bars, path) -> None:
    """Normalized bar store: ISO timestamps, canonical column order."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("timestamp,open,high,low,close,volume\n")
        for b in bars:
            ts = b.timestamp.strftime("%Y-%m-%d %H:%M:%S")
            fh.write(f"{ts},{float(b.open)!r},{float(b.high)!r},{float(b.low)!r},{float(b.close)!r},{int(b.volume)}\n")


def read_bars(path) -> list[MinuteBar]:
    """Read a normalized bar store written by write_bars."""
    return ingest_minutes(path, column_map=("datetime", "open", "high", "low",
                                            "close", "volume"),
                          delimiter=",", has_header=True)


class GapPolicy(Enum):
    IGNORE = "ignore"
    SKIP_SESSION_BREAKS = "skip-session-breaks"


def historical_returns(bars, window: tuple[int, int],
                       gap_policy: GapPolicy = GapPolicy.IGNORE,
                       source: str = "historical") -> ReturnsSeries:
    """Log returns of the close column over a window of exactly n steps.

    window = (offset, n). IGNORE treats all consecutive bars uniformly;
    SKIP_SESSION_BREAKS drops returns spanning a calendar-day boundary and
    keeps extending past them until n returns exist. Either policy yields
    exactly n returns or raises.
    """
    offset, n = window
    if offset < 0 or n < 2:
        raise InputError(f"window must have offset >= 0 and n >= 2, got {window}")
    closes = [b.close for b in bars]
    if any(c <= 0 for c in closes):
        raise InputError("bars contain nonpositive closes")

    if gap_policy is GapPolicy.IGNORE:
        if offset + n >= len(bars):
            raise InputError(
                f"window (offset={offset}, n={n}) needs {offset + n + 1} bars, "
                f"have {len(bars)}")
        c = np.asarray(closes[offset:offset + n + 1])
        values = np.log(c[1:] / c[:-1])
    else:
        values_list: list[float] = []
        i = offset
        while len(values_list) < n:
            if i + 1 >= len(bars):
                raise InputError(
                    f"window (offset={offset}, n={n}) ran past the end of the data "
                    f"after {len(values_list)} returns")
            a, b = bars[i], bars[i + 1]
            if a.timestamp.date() == b.timestamp.date():
                values_list.append(float(np.log(b.close / a.close)))
            i += 1
        values = np.asarray(values_list)

    return ReturnsSeries(values=values, provenance=Historical(source=source, offset=offset),
                         boundary=Boundary.OPEN)
