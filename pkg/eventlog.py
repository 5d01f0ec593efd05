"""Event log data model.

Traces, events and the attribute schema are immutable once built; every
later step (variant query, enrichment, local DP) only reads them and
produces new objects.
"""
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
import json
import logging
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

logger = logging.getLogger(__name__)

ActivityLabel = str
Variant = Tuple[ActivityLabel, ...]
# Numeric, categorical or boolean value; None stands for a missing value
AttributeValue = Union[float, str, bool, None]


class EventLogError(Exception):
    """Base class for event log data errors."""


class ParseError(EventLogError):
    """Raised when an XES document is not well-formed XML."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SchemaError(EventLogError):
    """Raised when log content contradicts the attribute schema or the data model."""


class AttributeKind(Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    BOOLEAN = "boolean"


def kind_of(value: AttributeValue) -> AttributeKind:
    """Return the attribute kind of a non-missing value."""
    # bool is a subclass of int, check it first
    if isinstance(value, bool):
        return AttributeKind.BOOLEAN
    if isinstance(value, (int, float)):
        return AttributeKind.NUMERIC
    if isinstance(value, str):
        return AttributeKind.CATEGORICAL
    raise SchemaError(f"Unsupported attribute value {value!r}")


@dataclass(frozen=True)
class AttributeSpec:
    """Kind, domain and privacy parameter of one event attribute.

    bounds is None for a numeric attribute whose domain is degenerate
    (all observed values equal); such attributes bypass noise.
    utility maps (x, y) to the score of reporting y for true value x.
    """
    name: str
    kind: AttributeKind
    epsilon: float
    bounds: Optional[Tuple[float, float]] = None
    categories: Tuple[str, ...] = ()
    utility: Optional[Mapping[Tuple[str, str], float]] = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise SchemaError(f"Attribute '{self.name}': epsilon must be positive, got {self.epsilon}")
        if self.bounds is not None and not self.bounds[0] < self.bounds[1]:
            raise SchemaError(f"Attribute '{self.name}': bounds need min < max, got {self.bounds}")
        if self.kind == AttributeKind.CATEGORICAL:
            if not self.categories:
                raise SchemaError(f"Attribute '{self.name}': category set is empty")
            if self.utility is not None:
                unknown = {c for pair in self.utility for c in pair} - set(self.categories)
                if unknown:
                    raise SchemaError(
                        f"Attribute '{self.name}': utility mentions unknown categories {sorted(unknown)}")

    def check(self, value: AttributeValue) -> None:
        """Raise SchemaError if a non-missing value does not fit this attribute."""
        if value is None:
            return
        if kind_of(value) != self.kind:
            raise SchemaError(
                f"Attribute '{self.name}' is {self.kind.value}, got {kind_of(value).value} value {value!r}")
        if self.kind == AttributeKind.NUMERIC and self.bounds is not None:
            low, high = self.bounds
            if not low <= value <= high:  # type: ignore[operator]
                raise SchemaError(f"Attribute '{self.name}': {value} outside domain {self.bounds}")
        if self.kind == AttributeKind.CATEGORICAL and value not in self.categories:
            raise SchemaError(f"Attribute '{self.name}': unknown category {value!r}")

    def utility_matrix(self) -> List[List[float]]:
        """Square utility matrix over `categories`.

        Diagonal entries default to 0 and off-diagonal entries to -1.
        """
        given = self.utility or {}
        return [
            [float(given.get((x, y), 0.0 if x == y else -1.0)) for y in self.categories]
            for x in self.categories
        ]


@dataclass(frozen=True)
class AttributeSchema:
    """Per-attribute kind, domain and epsilon for an event log."""
    attributes: Mapping[str, AttributeSpec] = field(default_factory=dict)

    def __contains__(self, name: object) -> bool:
        return name in self.attributes

    def __getitem__(self, name: str) -> AttributeSpec:
        return self.attributes[name]

    def names(self) -> List[str]:
        return sorted(self.attributes)

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping], default_epsilon: float = 1.0) -> 'AttributeSchema':
        """Build a schema from the sidecar JSON layout.

        Each entry holds "kind" and optionally "epsilon", "min"/"max",
        "categories" and "utility" ({from: {to: score}}).
        """
        specs = {}
        for name, entry in data.items():
            try:
                kind = AttributeKind(entry["kind"])
            except (KeyError, ValueError) as e:
                raise SchemaError(f"Attribute '{name}': missing or invalid kind") from e
            bounds = None
            if "min" in entry or "max" in entry:
                bounds = (float(entry["min"]), float(entry["max"]))
            utility = None
            if "utility" in entry:
                utility = {(x, y): float(score)
                           for x, row in entry["utility"].items() for y, score in row.items()}
            specs[name] = AttributeSpec(
                name=name,
                kind=kind,
                epsilon=float(entry.get("epsilon", default_epsilon)),
                bounds=bounds,
                categories=tuple(entry.get("categories", ())),
                utility=utility,
            )
        return cls(specs)

    @classmethod
    def from_json(cls, path: str, default_epsilon: float = 1.0) -> 'AttributeSchema':
        """Load a sidecar schema file."""
        try:
            with open(path, 'r') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"Invalid JSON in schema file '{path}': {e}") from e
        return cls.from_dict(data, default_epsilon)

    def with_overrides(self, overrides: Mapping[str, Mapping]) -> 'AttributeSchema':
        """Return a copy with per-attribute fields replaced.

        Override entries use the sidecar layout; fields they omit keep
        their current value.
        """
        specs = dict(self.attributes)
        for name, entry in overrides.items():
            current = specs.get(name)
            if current is None:
                if "kind" not in entry:
                    raise SchemaError(f"Override for unknown attribute '{name}' must declare its kind")
                specs.update(AttributeSchema.from_dict({name: entry}).attributes)
                continue
            merged = {"kind": entry.get("kind", current.kind.value),
                      "epsilon": entry.get("epsilon", current.epsilon)}
            if current.bounds is not None:
                merged["min"], merged["max"] = current.bounds
            if current.categories:
                merged["categories"] = list(current.categories)
            if current.utility:
                rows: Dict[str, Dict[str, float]] = {}
                for (x, y), score in current.utility.items():
                    rows.setdefault(x, {})[y] = score
                merged["utility"] = rows
            merged.update({k: v for k, v in entry.items() if k not in ("kind", "epsilon")})
            specs.update(AttributeSchema.from_dict({name: merged}).attributes)
        return AttributeSchema(specs)


@dataclass(frozen=True)
class Event:
    """One activity execution; payload holds only non-missing attribute values."""
    activity: ActivityLabel
    ts: int
    payload: Mapping[str, AttributeValue] = field(default_factory=dict)

    def get(self, name: str) -> AttributeValue:
        return self.payload.get(name)


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: Tuple[Event, ...]

    def __post_init__(self):
        if not self.events:
            raise SchemaError(f"Trace '{self.case_id}' has no events")
        for previous, current in zip(self.events, self.events[1:]):
            if current.ts < previous.ts:
                raise SchemaError(f"Trace '{self.case_id}' has decreasing timestamps")

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def start(self) -> int:
        return self.events[0].ts

    @property
    def end(self) -> int:
        return self.events[-1].ts


def variant_of(trace: Trace) -> Variant:
    """Project a trace onto its activity labels."""
    return tuple(event.activity for event in trace.events)


@dataclass(frozen=True)
class EventLog:
    traces: Tuple[Trace, ...]
    schema: AttributeSchema = field(default_factory=AttributeSchema)
    activity_universe: FrozenSet[ActivityLabel] = frozenset()

    def __post_init__(self):
        seen = set()
        for trace in self.traces:
            if trace.case_id in seen:
                raise SchemaError(f"Duplicate case id '{trace.case_id}'")
            seen.add(trace.case_id)
            for event in trace.events:
                if event.activity not in self.activity_universe:
                    raise SchemaError(f"Activity '{event.activity}' not in the activity universe")
                for name in event.payload:
                    if name not in self.schema:
                        raise SchemaError(f"Trace '{trace.case_id}': attribute '{name}' not in schema")

    @classmethod
    def build(cls, traces: Iterable[Trace], schema: Optional[AttributeSchema] = None,
              extra_activities: Iterable[ActivityLabel] = ()) -> 'EventLog':
        """Build a log whose activity universe covers every activity it contains."""
        traces = tuple(traces)
        universe = set(extra_activities)
        for trace in traces:
            universe.update(variant_of(trace))
        return cls(traces, schema if schema is not None else AttributeSchema(), frozenset(universe))

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    @property
    def num_events(self) -> int:
        return sum(len(trace) for trace in self.traces)

    def variants(self) -> Counter:
        """Multiset of trace variants."""
        return Counter(variant_of(trace) for trace in self.traces)

    def trace_lengths(self) -> List[int]:
        return [len(trace) for trace in self.traces]


@dataclass(frozen=True)
class EmpiricalDistributions:
    """Resampling pools drawn from an original log.

    pair_deltas holds the durations (ms) between consecutive events with
    the given activities; global_deltas holds all of them.
    """
    pair_deltas: Mapping[Tuple[ActivityLabel, ActivityLabel], Sequence[int]]
    global_deltas: Sequence[int]
    first_event_ts: Sequence[int]
    attr_pools: Mapping[str, Sequence[AttributeValue]]


def collect_distributions(log: EventLog) -> EmpiricalDistributions:
    """Collect the timestamp and attribute pools later steps resample from."""
    pair_deltas: Dict[Tuple[ActivityLabel, ActivityLabel], List[int]] = {}
    global_deltas: List[int] = []
    first_event_ts: List[int] = []
    attr_pools: Dict[str, List[AttributeValue]] = {name: [] for name in log.schema.names()}

    for trace in log.traces:
        first_event_ts.append(trace.start)
        for previous, current in zip(trace.events, trace.events[1:]):
            delta = current.ts - previous.ts
            pair_deltas.setdefault((previous.activity, current.activity), []).append(delta)
            global_deltas.append(delta)
        for event in trace.events:
            for name, value in event.payload.items():
                if value is not None:
                    attr_pools.setdefault(name, []).append(value)

    return EmpiricalDistributions(
        pair_deltas={pair: tuple(deltas) for pair, deltas in pair_deltas.items()},
        global_deltas=tuple(global_deltas),
        first_event_ts=tuple(first_event_ts),
        attr_pools={name: tuple(pool) for name, pool in attr_pools.items()},
    )
