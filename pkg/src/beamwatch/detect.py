"""Threshold calibration, anomaly flagging, consecutive-anomaly merging, and
event-based scoring against fault ground truth.

A fault counts as detected when at least one anomaly falls inside its match
interval: the `lead_window` seconds before the fault start (mode
"lead_only"), optionally extended through the fault itself (mode
"lead_plus_duration"). Precision is anomaly-based, recall is fault-based,
and accuracy is per-second agreement over the evaluated span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DataError, OrderError, ParseError, ShapeError
from .faults import FaultEvent

SCORING_MODES = ("lead_only", "lead_plus_duration")

ANOMALY_CSV_HEADER = "timestamp,error"
EVENT_CSV_HEADER = "start,end,peak_error"


@dataclass(frozen=True)
class DetectorThreshold:
    """Reconstruction-error threshold mean + multiplier * std."""

    mean: float
    std: float
    multiplier: float = 3.0

    def __post_init__(self):
        if self.std < 0:
            raise ConfigError(f"threshold std must be >= 0, got {self.std}")

    @property
    def value(self) -> float:
        return self.mean + self.multiplier * self.std


class AnomalyPoint(NamedTuple):
    """A single flagged window: its last-row epoch second and its error."""

    timestamp: int
    error: float


@dataclass(frozen=True)
class AnomalyEvent:
    """A merged run of anomaly points, inclusive interval with peak error."""

    start: int
    end: int
    peak_error: float

    def __post_init__(self):
        if self.end < self.start:
            raise OrderError(f"anomaly event end {self.end} before start {self.start}")


@dataclass(frozen=True)
class EvalReport:
    """Event-matching counts and the derived metrics."""

    true_positives: int       # faults with at least one matching anomaly
    false_positives: int      # anomalies matching no fault
    false_negatives: int      # faults with no matching anomaly
    matched_anomalies: int    # anomalies matching at least one fault
    total_faults: int
    total_anomalies: int
    precision: float
    recall: float
    accuracy: float
    f1: float
    matched_faults: tuple[FaultEvent, ...]


def compute_threshold(training_errors: np.ndarray, multiplier: float = 3.0) -> DetectorThreshold:
    """Calibrate the threshold from training reconstruction errors."""
    errors = np.asarray(training_errors, dtype=np.float64)
    if errors.size == 0:
        raise DataError("cannot calibrate a threshold from zero errors")
    if not np.all(np.isfinite(errors)) or np.any(errors < 0):
        raise DataError("training errors must be finite and nonnegative")
    return DetectorThreshold(mean=float(errors.mean()),
                             std=float(errors.std()),
                             multiplier=multiplier)


def flag_anomalies(errors: np.ndarray,
                   end_timestamps: np.ndarray,
                   threshold: DetectorThreshold | float) -> list[AnomalyPoint]:
    """Flag windows whose error strictly exceeds the threshold value.

    The anomaly timestamp is the window's last-row epoch second.
    """
    errors = np.asarray(errors, dtype=np.float64)
    end_timestamps = np.asarray(end_timestamps)
    if errors.shape != end_timestamps.shape:
        raise ShapeError(
            f"errors shape {errors.shape} != timestamps shape {end_timestamps.shape}"
        )
    value = threshold.value if isinstance(threshold, DetectorThreshold) else float(threshold)
    hits = np.flatnonzero(errors > value)
    return [AnomalyPoint(int(end_timestamps[i]), float(errors[i])) for i in hits]


def merge_consecutive_anomalies(points: Sequence[AnomalyPoint],
                                max_gap: int = 0) -> list[AnomalyEvent]:
    """Join runs of anomaly points whose inter-timestamp gap is <= max_gap.

    The gap between two points is the number of seconds strictly between
    them, so adjacent-second points merge even at max_gap = 0.
    """
    if max_gap < 0:
        raise ConfigError(f"max_gap must be >= 0, got {max_gap}")
    for a, b in zip(points, points[1:]):
        if b.timestamp < a.timestamp:
            raise OrderError("anomaly points must be sorted by timestamp")
    events: list[AnomalyEvent] = []
    for p in points:
        if events and p.timestamp - events[-1].end - 1 <= max_gap:
            prev = events[-1]
            events[-1] = AnomalyEvent(prev.start, p.timestamp,
                                      max(prev.peak_error, p.error))
        else:
            events.append(AnomalyEvent(p.timestamp, p.timestamp, p.error))
    return events


def _as_interval(anomaly) -> tuple[int, int]:
    if isinstance(anomaly, AnomalyPoint):
        return anomaly.timestamp, anomaly.timestamp
    return anomaly.start, anomaly.end


def _match_interval(fault: FaultEvent, lead_window: int, mode: str) -> tuple[int, int]:
    if mode == "lead_only":
        return fault.start - lead_window, fault.start
    return fault.start - lead_window, fault.end


def score_detections(anomalies: Sequence[AnomalyPoint] | Sequence[AnomalyEvent],
                     faults: Sequence[FaultEvent],
                     lead_window: int = 10,
                     mode: str = "lead_only",
                     frame_span: tuple[int, int] | None = None) -> EvalReport:
    """Score anomalies against fault ground truth.

    Args:
        anomalies: flagged points or merged events, within frame_span.
        faults: ground-truth fault intervals, within frame_span.
        lead_window: seconds before a fault start that still count as
            detecting it.
        mode: "lead_only" matches anomalies in [start - lead, start];
            "lead_plus_duration" extends the match interval to the fault end.
        frame_span: inclusive (first, last) epoch second of the evaluated
            data; the denominator of per-second accuracy.

    A fault is detected if any anomaly overlaps its match interval (counted
    once); an anomaly matching no fault is a false positive. Accuracy is the
    per-second agreement between flagged seconds and match-interval seconds
    over the span.

    Zero-division conventions: with no anomalies, precision is 0 when faults
    exist and 1 otherwise; with no faults, recall is 1 (nothing was missed);
    f1 is 0 when precision + recall is 0. An empty ground truth with no
    anomalies therefore scores as the vacuous perfect case.
    """
    if lead_window < 0:
        raise ConfigError(f"lead_window must be >= 0, got {lead_window}")
    if mode not in SCORING_MODES:
        raise ConfigError(f"mode must be one of {SCORING_MODES}, got {mode!r}")
    if frame_span is None or frame_span[1] < frame_span[0]:
        raise DataError(f"empty frame span: {frame_span}")
    span_start, span_end = int(frame_span[0]), int(frame_span[1])
    intervals = [_as_interval(a) for a in anomalies]
    for s, e in intervals:
        if s < span_start or e > span_end:
            raise DataError(f"anomaly [{s}, {e}] outside frame span")
    for f in faults:
        if f.start < span_start or f.end > span_end:
            raise DataError(f"fault [{f.start}, {f.end}] outside frame span")

    match_ivs = [_match_interval(f, lead_window, mode) for f in faults]
    matched_faults = []
    for fault, (ms, me) in zip(faults, match_ivs):
        if any(s <= me and e >= ms for s, e in intervals):
            matched_faults.append(fault)
    matched_anoms = sum(
        1 for s, e in intervals if any(s <= me and e >= ms for ms, me in match_ivs)
    )

    tp = len(matched_faults)
    fn = len(faults) - tp
    fp = len(intervals) - matched_anoms

    if intervals:
        precision = matched_anoms / len(intervals)
    else:
        precision = 0.0 if faults else 1.0
    recall = tp / len(faults) if faults else 1.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    n_seconds = span_end - span_start + 1
    predicted = np.zeros(n_seconds, dtype=bool)
    for s, e in intervals:
        predicted[s - span_start:e - span_start + 1] = True
    truth = np.zeros(n_seconds, dtype=bool)
    for ms, me in match_ivs:
        lo = max(ms, span_start)
        hi = min(me, span_end)
        if lo <= hi:
            truth[lo - span_start:hi - span_start + 1] = True
    accuracy = float(np.mean(predicted == truth))

    return EvalReport(
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        matched_anomalies=matched_anoms,
        total_faults=len(faults),
        total_anomalies=len(intervals),
        precision=precision,
        recall=recall,
        accuracy=accuracy,
        f1=f1,
        matched_faults=tuple(matched_faults),
    )


def format_anomaly_csv(points: Iterable[AnomalyPoint]) -> str:
    lines = [ANOMALY_CSV_HEADER]
    lines += [f"{p.timestamp},{p.error!r}" for p in points]
    return "\n".join(lines) + "\n"


def parse_anomaly_csv(text: str) -> list[AnomalyPoint]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != ANOMALY_CSV_HEADER:
        raise ParseError(f"line 1: expected header {ANOMALY_CSV_HEADER!r}")
    points: list[AnomalyPoint] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'timestamp,error'")
        try:
            ts = int(parts[0])
            err = float(parts[1])
        except ValueError:
            raise ParseError(f"line {lineno}: malformed number in {line!r}") from None
        if not math.isfinite(err):
            raise ParseError(f"line {lineno}: non-finite error in {line!r}")
        points.append(AnomalyPoint(ts, err))
    return points


def format_event_csv(events: Iterable[AnomalyEvent]) -> str:
    lines = [EVENT_CSV_HEADER]
    lines += [f"{e.start},{e.end},{e.peak_error!r}" for e in events]
    return "\n".join(lines) + "\n"
