"""Utility measures for comparing an anonymized log with its original.

Event level: fraction of cases with a true boolean attribute. Trace
level: case duration statistics. Log level: relative number of active
cases per time bucket.
"""
import csv
from dataclasses import asdict, dataclass, field
import json
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from eventlog import AttributeKind, EventLog, SchemaError

logger = logging.getLogger(__name__)

DAY_MS = 24 * 60 * 60 * 1000


class NoValues(ValueError):
    """Raised when an attribute has no value anywhere in the log."""


def _first_values(log: EventLog, attr: str) -> List[bool]:
    """First non-missing value of `attr` in every trace that has one.

    Raises SchemaError when the schema declares `attr` with another kind.
    """
    if attr in log.schema and log.schema[attr].kind != AttributeKind.BOOLEAN:
        raise SchemaError(f"Attribute '{attr}' is {log.schema[attr].kind.value}, not boolean")
    values = []
    for trace in log.traces:
        for event in trace.events:
            value = event.get(attr)
            if value is not None:
                values.append(bool(value))
                break
    if not values:
        raise NoValues(f"Attribute '{attr}' has no values in the log")
    return values


def boolean_fraction(log: EventLog, attr: str) -> float:
    """Share of cases whose first value of `attr` is true."""
    values = _first_values(log, attr)
    return sum(values) / len(values)


def false_fraction(log: EventLog, attr: str) -> float:
    values = _first_values(log, attr)
    return values.count(False) / len(values)


@dataclass(frozen=True)
class DurationStats:
    """Case duration statistics in milliseconds."""
    min: float
    max: float
    avg: float
    median: float

    def in_days(self) -> Dict[str, float]:
        return {name: value / DAY_MS for name, value in asdict(self).items()}


def case_duration_stats(log: EventLog) -> DurationStats:
    if not len(log):
        raise ValueError("Case durations need a nonempty log")
    durations = np.array([trace.end - trace.start for trace in log.traces], dtype=float)
    return DurationStats(float(durations.min()), float(durations.max()),
                         float(durations.mean()), float(np.median(durations)))


def active_cases_series(log: EventLog, bucket: int = DAY_MS, start: Optional[int] = None,
                        end: Optional[int] = None) -> List[Tuple[int, float]]:
    """Relative number of active cases per time bucket.

    A case is active in every bucket that intersects [first ts, last ts];
    counts are divided by the number of traces in the log. Buckets cover
    [start, end], by default the log's own time span.
    """
    if bucket <= 0:
        raise ValueError(f"bucket must be positive, got {bucket}")
    if not len(log):
        return []
    starts = np.array([trace.start for trace in log.traces], dtype=np.int64)
    ends = np.array([trace.end for trace in log.traces], dtype=np.int64)
    origin = int(starts.min()) if start is None else start
    last = int(ends.max()) if end is None else end
    buckets = (last - origin) // bucket + 1

    first_bucket = np.clip((starts - origin) // bucket, 0, buckets)
    last_bucket = np.clip((ends - origin) // bucket, -1, buckets - 1)
    visible = first_bucket <= last_bucket
    changes = np.zeros(buckets + 1, dtype=np.int64)
    np.add.at(changes, first_bucket[visible], 1)
    np.add.at(changes, last_bucket[visible] + 1, -1)
    active = np.cumsum(changes[:-1]) / len(log)
    return [(origin + i * bucket, float(value)) for i, value in enumerate(active)]


def series_correlation(a: Sequence[float], b: Sequence[float]) -> Optional[float]:
    """Pearson r of two equally bucketed series; None when either is constant."""
    x, y = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if len(x) < 2 or x.std() == 0 or y.std() == 0:
        return None
    return float(np.corrcoef(x, y)[0, 1])


@dataclass
class UtilityReport:
    sizes: Dict[str, Dict[str, int]] = field(default_factory=dict)
    boolean_fractions: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)
    case_durations_days: Dict[str, Dict[str, float]] = field(default_factory=dict)
    bucket_ms: int = DAY_MS
    # (bucket start, original, anonymized)
    active_cases: List[Tuple[int, float, float]] = field(default_factory=list)
    active_cases_correlation: Optional[float] = None

    def scalars(self) -> dict:
        data = asdict(self)
        del data["active_cases"]
        return data


def _sizes(log: EventLog) -> Dict[str, int]:
    return {"traces": len(log), "events": log.num_events, "variants": len(log.variants())}


def _fraction_or_none(log: EventLog, attr: str) -> Optional[float]:
    try:
        return boolean_fraction(log, attr)
    except NoValues:
        logger.warning("No values of '%s' to compare", attr)
        return None


def compare(original: EventLog, anonymized: EventLog, attrs: Sequence[str],
            bucket: int = DAY_MS) -> UtilityReport:
    """Compute every utility measure on both logs over a shared time range."""
    logs = {"original": original, "anonymized": anonymized}
    report = UtilityReport(bucket_ms=bucket)
    report.sizes = {label: _sizes(log) for label, log in logs.items()}
    report.boolean_fractions = {
        attr: {label: _fraction_or_none(log, attr) for label, log in logs.items()} for attr in attrs
    }
    report.case_durations_days = {
        label: case_duration_stats(log).in_days() for label, log in logs.items() if len(log)
    }

    nonempty = [log for log in logs.values() if len(log)]
    if nonempty:
        start = min(trace.start for log in nonempty for trace in log.traces)
        end = max(trace.end for log in nonempty for trace in log.traces)
        series = {label: active_cases_series(log, bucket, start, end) for label, log in logs.items()}
        buckets = (end - start) // bucket + 1
        values = {label: [v for _, v in s] if s else [0.0] * buckets for label, s in series.items()}
        report.active_cases = [
            (start + i * bucket, values["original"][i], values["anonymized"][i]) for i in range(buckets)
        ]
        report.active_cases_correlation = series_correlation(values["original"], values["anonymized"])
    return report


def write_report(report: UtilityReport, prefix: str) -> Tuple[str, str]:
    """Write <prefix>_series.csv and <prefix>_metrics.json; return both paths."""
    series_path, metrics_path = f"{prefix}_series.csv", f"{prefix}_metrics.json"
    with open(series_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["bucket_start_ms", "original", "anonymized"])
        writer.writerows(report.active_cases)
    with open(metrics_path, "w") as f:
        json.dump(report.scalars(), f, indent=2)
    return series_path, metrics_path
