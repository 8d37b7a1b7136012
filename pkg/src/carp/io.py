"""CSV ingestion, serialization, and summaries for eruption event logs.

The input format mirrors the observation tables: a header ``time,duration,
geyser`` with local timestamps ("YYYY-MM-DD HH:MM:SS"), eruption durations in
hours, and geyser names mapped to type labels through a configurable mapping.
Ingestion sorts rows, converts times to hours since the first event, and
builds the covariate snapshots (most recent duration of each type strictly
before the event; zero before a type's first eruption).

Timestamps are treated as naive local time; gaps are hour-scale so no
timezone or DST arithmetic is applied.
"""

from __future__ import annotations

import csv
import io as _io
from datetime import datetime, timedelta

import numpy as np

from .events import EventHistory, EventRecord, require_valid

__all__ = [
    "DEFAULT_MAPPING",
    "IngestError",
    "ingest_csv",
    "ingest_csv_text",
    "serialize_history_csv",
    "summarize",
]

DEFAULT_MAPPING = {"West Triplet": 1, "Grotto": 2}
TIME_FORMAT = "%Y-%m-%d %H:%M:%S"
REQUIRED_COLUMNS = ("time", "duration", "geyser")
_FALLBACK_ORIGIN = "2000-01-01 00:00:00"


class IngestError(ValueError):
    pass


def _parse_timestamp(raw: str, line: int) -> datetime:
    try:
        return datetime.strptime(raw.strip(), TIME_FORMAT)
    except ValueError as exc:
        raise IngestError(f"line {line}: unparseable timestamp {raw!r}") from exc


def ingest_csv_text(text: str, mapping: dict[str, int] | None = None,
                    date_min: str | None = None, date_max: str | None = None) -> EventHistory:
    """Parse CSV content into a validated EventHistory.

    Rows are sorted by timestamp, so shuffled input produces the same
    history. Optional inclusive date bounds slice the study window before
    conversion. Unparseable rows, duplicate timestamps, negative durations,
    and unmapped geyser names raise IngestError with the offending line.
    """
    mapping = mapping or DEFAULT_MAPPING
    if not set(mapping.values()) <= {1, 2}:
        raise IngestError("mapping must assign type labels 1 or 2")
    reader = csv.DictReader(_io.StringIO(text))
    if reader.fieldnames is None:
        raise IngestError("empty file: header row required")
    fields = [f.strip().lower() for f in reader.fieldnames]
    missing = [c for c in REQUIRED_COLUMNS if c not in fields]
    if missing:
        raise IngestError(f"header must contain {', '.join(REQUIRED_COLUMNS)}; missing {missing}")
    key = {c: reader.fieldnames[fields.index(c)] for c in REQUIRED_COLUMNS}

    lo = _parse_timestamp(date_min, 0) if date_min else None
    hi = _parse_timestamp(date_max, 0) if date_max else None

    rows: list[tuple[datetime, float, int, int]] = []
    for raw in reader:
        line = reader.line_num
        ts = _parse_timestamp(raw[key["time"]] or "", line)
        if (lo and ts < lo) or (hi and ts > hi):
            continue
        try:
            duration = float(raw[key["duration"]])
        except (TypeError, ValueError) as exc:
            raise IngestError(f"line {line}: unparseable duration {raw[key['duration']]!r}") from exc
        if not np.isfinite(duration) or duration < 0:
            raise IngestError(f"line {line}: duration must be finite and >= 0")
        name = (raw[key["geyser"]] or "").strip()
        if name not in mapping:
            raise IngestError(f"line {line}: unmapped geyser name {name!r}")
        rows.append((ts, duration, mapping[name], line))

    rows.sort(key=lambda r: r[0])
    for a, b in zip(rows, rows[1:]):
        if a[0] == b[0]:
            raise IngestError(f"duplicate timestamp {a[0]} (lines {a[3]} and {b[3]})")

    if not rows:
        return EventHistory(events=(), termination=0.0, origin=None)

    t0 = rows[0][0]
    latest = {1: 0.0, 2: 0.0}
    records = []
    for ts, duration, etype, _ in rows:
        hours = (ts - t0).total_seconds() / 3600.0
        records.append(EventRecord(time=hours, event_type=etype,
                                   covariates=(latest[1], latest[2]), duration=duration))
        latest[etype] = duration
    history = EventHistory(events=tuple(records), termination=records[-1].time,
                           origin=t0.strftime(TIME_FORMAT))
    require_valid(history)
    return history


def ingest_csv(path, mapping: dict[str, int] | None = None,
               date_min: str | None = None, date_max: str | None = None) -> EventHistory:
    with open(path, encoding="utf-8") as fh:
        return ingest_csv_text(fh.read(), mapping, date_min, date_max)


def serialize_history_csv(history: EventHistory, mapping: dict[str, int] | None = None) -> str:
    """Render a history back to the time/duration/geyser CSV format.

    Requires per-event durations (present on ingested and simulated
    histories); ingesting the output reproduces the history exactly.
    """
    mapping = mapping or DEFAULT_MAPPING
    names = {v: k for k, v in mapping.items()}
    origin = datetime.strptime(history.origin or _FALLBACK_ORIGIN, TIME_FORMAT)
    buf = _io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(REQUIRED_COLUMNS)
    for i, e in enumerate(history.events, start=1):
        if e.duration is None:
            raise ValueError(f"event {i} has no duration; cannot serialize")
        ts = origin + timedelta(hours=e.time)
        writer.writerow([ts.strftime(TIME_FORMAT), f"{e.duration:.10g}", names[e.event_type]])
    return buf.getvalue()


def summarize(history: EventHistory) -> dict:
    """Per-type counts and gap/duration sample moments.

    Gap statistics use the observed positive gaps of each type (an event at
    the time origin contributes a degenerate zero gap, which is excluded);
    duration statistics appear only when durations were recorded. Moments of
    fewer than one (mean) or two (sd) observations are reported as None.
    """
    from .events import extract_gaps

    out = {"n": history.n, "termination": history.termination, "per_type": {}}
    for j in (1, 2):
        gaps = extract_gaps(history, j)
        gaps = gaps[gaps > 0]
        durations = [e.duration for e in history.events
                     if e.event_type == j and e.duration is not None]
        stats = {
            "count": history.n_of_type(j),
            "gap_mean": float(np.mean(gaps)) if gaps.size else None,
            "gap_sd": float(np.std(gaps, ddof=1)) if gaps.size > 1 else None,
            "duration_mean": float(np.mean(durations)) if durations else None,
            "duration_sd": float(np.std(durations, ddof=1)) if len(durations) > 1 else None,
        }
        out["per_type"][j] = stats
    return out
