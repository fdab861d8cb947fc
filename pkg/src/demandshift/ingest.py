"""Event parsing and hourly aggregation into a dense demand grid.

Timestamps are local wall-clock time. Any UTC offset present in the input is
dropped, so the two occurrences of a repeated DST hour fall into the same
naive slot and their counts merge. A skipped DST hour has no events at all
and is therefore flagged missing.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import IngestError, SpanError
from .modes import MODES, MODE_INDEX, N_MODES, parse_mode

logger = logging.getLogger(__name__)

REJECT_THRESHOLD = 0.10
HOUR = np.timedelta64(1, "h")
CSV_TIME_FORMAT = "%Y-%m-%dT%H:%M"


@dataclass(frozen=True)
class RawEvent:
    mode: str
    timestamp: datetime
    source_id: str | None = None
    # pre-aggregated inputs carry a record count per row; raw logs use 1
    weight: int = 1
    line: int = 0


@dataclass(frozen=True)
class Schema:
    """Column mapping for one delimiter-separated source.

    Either ``mode_column`` names the column holding the mode, or ``mode``
    fixes a single mode for the whole source (e.g. a car probe feed).
    ``timestamp_format`` is a ``strptime`` pattern; ``None`` means ISO 8601.
    """

    timestamp_column: str = "timestamp"
    mode_column: str | None = "mode"
    mode: str | None = None
    timestamp_format: str | None = None
    delimiter: str = ","
    source_id_column: str | None = None
    count_column: str | None = None

    def __post_init__(self):
        if (self.mode_column is None) == (self.mode is None):
            raise ValueError("schema needs exactly one of mode_column / mode")
        if self.mode is not None:
            object.__setattr__(self, "mode", parse_mode(self.mode))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "mode" in d and "mode_column" not in d:
            d["mode_column"] = None
        return cls(**d)


@dataclass
class RejectLog:
    entries: list = field(default_factory=list)

    def add(self, line, reason):
        self.entries.append((line, reason))

    def __len__(self):
        return len(self.entries)

    def lines(self):
        return [f"{line}\t{reason}" for line, reason in self.entries]

    def write(self, path):
        text = "".join(s + "\n" for s in self.lines())
        Path(path).write_text(text, encoding="utf-8")


def _check_threshold(n_rejects, n_total, what):
    if n_total and n_rejects / n_total > REJECT_THRESHOLD:
        raise IngestError(
            f"{what}: {n_rejects} of {n_total} rows rejected "
            f"(> {REJECT_THRESHOLD:.0%} threshold)"
        )


def parse_timestamp(text, fmt=None):
    text = text.strip()
    ts = datetime.strptime(text, fmt) if fmt else datetime.fromisoformat(text)
    return ts.replace(tzinfo=None)


def parse_events(stream, schema=None, rejects=None):
    """Parse delimiter-separated rows into :class:`RawEvent` objects.

    Malformed rows are skipped and recorded in ``rejects`` with their
    1-based file line number (the header is line 1). More than 10% rejected
    rows raises :class:`IngestError`.
    """
    schema = schema or Schema()
    if rejects is None:
        rejects = RejectLog()
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    reader = csv.reader(stream, delimiter=schema.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        return []
    header = [h.strip() for h in header]
    try:
        i_ts = header.index(schema.timestamp_column)
        i_mode = header.index(schema.mode_column) if schema.mode_column else None
        i_src = header.index(schema.source_id_column) if schema.source_id_column else None
        i_cnt = header.index(schema.count_column) if schema.count_column else None
    except ValueError as exc:
        raise IngestError(f"header {header} does not match schema: {exc}") from None

    events = []
    n_rows = 0
    n_before = len(rejects)
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        n_rows += 1
        if len(row) != len(header):
            rejects.add(line, f"expected {len(header)} fields, got {len(row)}")
            continue
        try:
            ts = parse_timestamp(row[i_ts], schema.timestamp_format)
        except ValueError:
            rejects.add(line, f"bad timestamp {row[i_ts]!r}")
            continue
        if i_mode is None:
            mode = schema.mode
        else:
            try:
                mode = parse_mode(row[i_mode])
            except ValueError as exc:
                rejects.add(line, str(exc))
                continue
        weight = 1
        if i_cnt is not None:
            try:
                weight = int(row[i_cnt])
            except ValueError:
                rejects.add(line, f"bad count {row[i_cnt]!r}")
                continue
            if weight < 0:
                rejects.add(line, f"negative count {weight}")
                continue
        src = row[i_src] if i_src is not None else None
        events.append(RawEvent(mode, ts, src, weight, line))

    _check_threshold(len(rejects) - n_before, n_rows, "parse")
    return events


def read_events(path, schema=None, rejects=None):
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_events(fh, schema, rejects)


def truncate_hour(ts):
    return ts.replace(minute=0, second=0, microsecond=0)


def _as_hour64(ts):
    return np.datetime64(truncate_hour(ts), "h")


def event_span(events):
    if not events:
        raise SpanError("cannot derive a span from zero events")
    stamps = [e.timestamp for e in events]
    return truncate_hour(min(stamps)), truncate_hour(max(stamps))


@dataclass
class DemandSeries:
    """Dense hourly count grid, one column per mode in ``MODES`` order.

    ``missing`` marks data-outage hours (no events in any mode). Their counts
    are stored as zero but must never be read as observations.
    """

    start: np.datetime64
    counts: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        self.start = np.datetime64(self.start, "h")
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.missing = np.asarray(self.missing, dtype=bool)
        if self.counts.ndim != 2 or self.counts.shape[1] != N_MODES:
            raise ValueError(f"counts must have shape (n_hours, {N_MODES})")
        if self.missing.shape != (self.counts.shape[0],):
            raise ValueError("missing mask length differs from counts")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    @property
    def n_hours(self):
        return self.counts.shape[0]

    @property
    def end(self):
        return self.start + (self.n_hours - 1) * HOUR

    @property
    def span(self):
        return self.start, self.end

    @property
    def hours(self):
        return self.start + np.arange(self.n_hours) * HOUR

    def slot_index(self, slot):
        i = int((np.datetime64(slot, "h") - self.start) / HOUR)
        if not 0 <= i < self.n_hours:
            raise SpanError(f"{slot} outside span {self.start}..{self.end}")
        return i

    def count(self, mode, slot):
        return int(self.counts[self.slot_index(slot), MODE_INDEX[mode]])

    def decomposition(self):
        """Return ``(week, weekday, hour)`` integer arrays for every slot."""
        return decompose_hours(self.hours, self.start)

    @property
    def n_weeks(self):
        return int(self.decomposition()[0][-1]) + 1

    def copy(self):
        return DemandSeries(self.start, self.counts.copy(), self.missing.copy())

    def __eq__(self, other):
        if not isinstance(other, DemandSeries):
            return NotImplemented
        return (
            self.start == other.start
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.missing, other.missing)
        )


def aggregate_hourly(events: Sequence[RawEvent], span, rejects=None) -> DemandSeries:
    """Count events per (mode, hour) over the inclusive hour ``span``.

    Every hour with zero events across all modes is flagged missing.
    """
    first, last = (np.datetime64(truncate_hour(s) if isinstance(s, datetime) else s, "h") for s in span)
    if last < first:
        raise SpanError(f"empty span {first}..{last}")
    if rejects is None:
        rejects = RejectLog()
    n_hours = int((last - first) / HOUR) + 1
    counts = np.zeros((n_hours, N_MODES), dtype=np.int64)

    if events:
        idx = np.fromiter(
            ((_as_hour64(e.timestamp) - first) / HOUR for e in events),
            dtype=np.int64,
            count=len(events),
        )
        col = np.fromiter((MODE_INDEX[e.mode] for e in events), dtype=np.int64, count=len(events))
        w = np.fromiter((e.weight for e in events), dtype=np.int64, count=len(events))
        inside = (idx >= 0) & (idx < n_hours)
        for k in np.flatnonzero(~inside):
            e = events[k]
            rejects.add(e.line, f"timestamp {e.timestamp.isoformat()} outside span")
        _check_threshold(int((~inside).sum()), len(events), "aggregate")
        np.add.at(counts, (idx[inside], col[inside]), w[inside])

    missing = counts.sum(axis=1) == 0
    return DemandSeries(first, counts, missing)


def decompose_hours(hours, span_start):
    """Vectorised ``(week, weekday, hour)`` decomposition relative to ``span_start``."""
    hours = np.asarray(hours, dtype="datetime64[h]")
    start = np.datetime64(span_start, "h")
    if (hours < start).any():
        raise SpanError("slot before span start")
    days = hours.astype("datetime64[D]").astype(np.int64)
    hod = (hours.astype(np.int64) - days * 24).astype(np.int64)
    # 1970-01-01 was a Thursday
    weekday = (days + 3) % 7
    monday = days - weekday
    d0 = int(start.astype("datetime64[D]").astype(np.int64))
    monday0 = d0 - (d0 + 3) % 7
    week = (monday - monday0) // 7
    return week, weekday, hod


def decompose_slot(slot, span_start):
    """Return ``(m, d, h)``: ISO-week index from the span's first ISO week,
    weekday (Mon=0) and hour of day."""
    w, d, h = decompose_hours(np.array([np.datetime64(slot, "h")]), span_start)
    return int(w[0]), int(d[0]), int(h[0])


def recompose_slot(m, d, h, span_start):
    """Inverse of :func:`decompose_slot`; returns a naive ``datetime``."""
    start = np.datetime64(span_start, "h").astype(datetime)
    monday0 = datetime(start.year, start.month, start.day) - timedelta(days=start.weekday())
    return monday0 + timedelta(weeks=m, days=d, hours=h)


def format_hour(h64):
    return np.datetime64(h64, "h").astype(datetime).strftime(CSV_TIME_FORMAT)


def parse_hour(text):
    return np.datetime64(truncate_hour(parse_timestamp(text)), "h")


def write_demand_csv(series: DemandSeries, path):
    """``timestamp,bus,tram,metro,bike,car``; missing hours have empty fields."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *MODES])
        for t, row, miss in zip(series.hours, series.counts, series.missing):
            w.writerow([format_hour(t), *([""] * N_MODES if miss else row.tolist())])


def read_demand_csv(path) -> DemandSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["timestamp", *MODES]:
            raise IngestError(f"unexpected demand header {header}")
        stamps, rows, missing = [], [], []
        for row in reader:
            stamps.append(parse_hour(row[0]))
            if all(v == "" for v in row[1:]):
                rows.append([0] * N_MODES)
                missing.append(True)
            else:
                rows.append([int(v) for v in row[1:]])
                missing.append(False)
    if not stamps:
        raise IngestError(f"{path}: no rows")
    stamps = np.array(stamps, dtype="datetime64[h]")
    if not np.array_equal(stamps, stamps[0] + np.arange(len(stamps)) * HOUR):
        raise IngestError(f"{path}: hours are not contiguous")
    return DemandSeries(stamps[0], np.array(rows, dtype=np.int64), np.array(missing))


def ingest_sources(sources: Iterable, span=None, threads=1):
    """Parse every ``(path, schema)`` source and aggregate into one series.

    Sources are parsed concurrently when ``threads > 1``; events are merged
    in source order, so the result does not depend on the thread count.
    Returns ``(series, reject_logs)`` with one log per source.
    """
    sources = list(sources)
    if not sources:
        raise IngestError("no input sources")
    logs = [RejectLog() for _ in sources]

    def work(i):
        path, schema = sources[i]
        return read_events(path, schema, logs[i])

    if threads > 1 and len(sources) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sources))))
    else:
        parts = [work(i) for i in range(len(sources))]

    if span is None:
        span = event_span([e for part in parts for e in part])
    per_source = [aggregate_hourly(part, span, log) for part, log in zip(parts, logs)]
    counts = sum(s.counts for s in per_source)
    series = DemandSeries(per_source[0].start, counts, counts.sum(axis=1) == 0)
    logger.info("ingested %d records into %d hours (%d missing)",
                int(counts.sum()), series.n_hours, int(series.missing.sum()))
    return series, logs
