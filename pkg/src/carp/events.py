"""Canonical data model for a bivariate recurrent-event history.

An event history is an ordered sequence of system events, each carrying its
occurrence time (hours since the first observed event), the event type (1 or
2), and the covariate snapshot in force during the interval that ends at the
event — the most recent eruption duration of each type strictly before the
event, zero for types not yet seen. Age bookkeeping (time since each type's
last event, before and after the reset at an event) is derived here and
consumed by every other module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EventRecord",
    "EventHistory",
    "AgeState",
    "Violation",
    "validate_history",
    "age_trajectory",
    "extract_gaps",
]

EVENT_TYPES = (1, 2)


@dataclass(frozen=True)
class EventRecord:
    """One system event: time, which type fired, and the covariates in force.

    ``duration`` is the event's own eruption duration when known (ingested or
    simulated data); it is not used by the likelihood but enables round-trip
    serialization and covariate snapshots past the last event.
    """

    time: float
    event_type: int
    covariates: tuple[float, float] = (0.0, 0.0)
    duration: float | None = None


@dataclass(frozen=True)
class EventHistory:
    """Ordered bivariate event history, terminated administratively at kappa."""

    events: tuple[EventRecord, ...]
    termination: float
    origin: str | None = field(default=None, compare=False)  # calendar time of t=0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def n(self) -> int:
        return len(self.events)

    def n_of_type(self, event_type: int) -> int:
        return sum(1 for e in self.events if e.event_type == event_type)

    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.events], dtype=float)

    def types(self) -> np.ndarray:
        return np.array([e.event_type for e in self.events], dtype=int)

    def covariate_matrix(self) -> np.ndarray:
        """(n, 2) matrix of per-event covariate snapshots."""
        if not self.events:
            return np.zeros((0, 2))
        return np.array([e.covariates for e in self.events], dtype=float)

    def counting_process(self, event_type: int, t) -> np.ndarray:
        """N_j(t): number of type-j events at or before each time in t."""
        tj = np.sort([e.time for e in self.events if e.event_type == event_type])
        return np.searchsorted(tj, np.asarray(t, dtype=float), side="right")


@dataclass(frozen=True)
class AgeState:
    """Ages of both types around one event.

    ``pre_ages`` is the left limit just before the event (no reset);
    ``post_ages`` has the fired type's component reset to zero.
    """

    pre_ages: tuple[float, float]
    post_ages: tuple[float, float]


@dataclass(frozen=True)
class Violation:
    index: int
    message: str
    severity: str = "error"  # "error" | "warning"


def validate_history(history: EventHistory) -> list[Violation]:
    """Check the ordering and domain invariants of a history.

    Returns the itemized violations; an empty list (or warnings only) means
    the history is usable. Negative covariates are flagged as warnings since
    durations should be nonnegative but do not break the likelihood.
    """
    out: list[Violation] = []
    prev_time = 0.0
    for i, e in enumerate(history.events, start=1):
        if e.event_type not in EVENT_TYPES:
            out.append(Violation(i, f"event_type must be 1 or 2, got {e.event_type}"))
        if not np.isfinite(e.time) or e.time < 0:
            out.append(Violation(i, f"time must be finite and >= 0, got {e.time}"))
        elif e.time <= prev_time and not (i == 1 and e.time == 0.0 and prev_time == 0.0):
            out.append(Violation(i, f"non-strictly-increasing at index {i}"))
        if len(e.covariates) != 2 or not all(np.isfinite(c) for c in e.covariates):
            out.append(Violation(i, "covariates must be a finite 2-vector"))
        elif any(c < 0 for c in e.covariates):
            out.append(Violation(i, "negative covariate (duration expected >= 0)", "warning"))
        prev_time = e.time
    if history.events and history.termination < history.events[-1].time:
        out.append(Violation(len(history.events), "termination precedes the last event"))
    if not history.events and history.termination < 0:
        out.append(Violation(0, "termination must be >= 0"))
    return out


def is_valid(history: EventHistory) -> bool:
    return not any(v.severity == "error" for v in validate_history(history))


def require_valid(history: EventHistory) -> None:
    errors = [v for v in validate_history(history) if v.severity == "error"]
    if errors:
        detail = "; ".join(f"[{v.index}] {v.message}" for v in errors)
        raise ValueError(f"invalid event history: {detail}")


def age_trajectory(history: EventHistory) -> list[AgeState]:
    """Age states per event, preceded by the installation state (0, 0).

    For event i of type d: pre_ages adds the elapsed time since the previous
    event to both components of the previous post_ages; post_ages then resets
    component d to zero.
    """
    states = [AgeState(pre_ages=(0.0, 0.0), post_ages=(0.0, 0.0))]
    post = np.zeros(2)
    prev_time = 0.0
    for e in history.events:
        pre = post + (e.time - prev_time)
        post = pre.copy()
        post[e.event_type - 1] = 0.0
        states.append(AgeState(pre_ages=(pre[0], pre[1]), post_ages=(post[0], post[1])))
        prev_time = e.time
    return states


def age_arrays(history: EventHistory) -> tuple[np.ndarray, np.ndarray]:
    """(pre_ages, post_ages_before) as (n, 2) arrays for likelihood work.

    Row i holds the pre-age vector at event i and the post-age vector left by
    event i-1 (zeros for i = 0), i.e. the state the interval ending at event
    i started from.
    """
    n = history.n
    pre = np.zeros((n, 2))
    prev_post = np.zeros((n, 2))
    post = np.zeros(2)
    prev_time = 0.0
    for i, e in enumerate(history.events):
        prev_post[i] = post
        pre[i] = post + (e.time - prev_time)
        post = pre[i].copy()
        post[e.event_type - 1] = 0.0
        prev_time = e.time
    return pre, prev_post


def extract_gaps(history: EventHistory, event_type: int) -> np.ndarray:
    """Observed gap times of one type; the first gap is measured from t = 0."""
    if event_type not in EVENT_TYPES:
        raise ValueError("event_type must be 1 or 2")
    times = [e.time for e in history.events if e.event_type == event_type]
    return np.diff(np.concatenate(([0.0], times))) if times else np.array([])


def snapshot_after_last(history: EventHistory) -> tuple[float, float]:
    """Covariate snapshot in force after the final event.

    Uses the final event's own duration when recorded; otherwise falls back
    to the snapshot that was in force when it fired.
    """
    if not history.events:
        return (0.0, 0.0)
    last = history.events[-1]
    cov = list(last.covariates)
    if last.duration is not None:
        cov[last.event_type - 1] = last.duration
    return (cov[0], cov[1])
