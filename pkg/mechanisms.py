"""Local differential privacy for event context.

Each attribute value is perturbed by the mechanism for its kind, with
the attribute's own epsilon: bounded Laplace for numeric values, binary
randomized response for booleans and the exponential mechanism for
categories. Timestamps get one shift per trace plus noise on every
interval, bounded so the event order never changes.
"""
from dataclasses import dataclass, field
import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from eventlog import AttributeKind, AttributeSchema, AttributeValue, Event, EventLog, Trace
from rng import Step, derive_rng

logger = logging.getLogger(__name__)

# Laplace draws per rejection round of the bounded mechanism
_BATCH = 64


class UnknownCategory(ValueError):
    """Raised when a categorical value is not part of its attribute's domain."""


@dataclass(frozen=True)
class NoiseParams:
    """Timestamp noise scales (ms) and per-attribute sensitivity overrides.

    Attribute epsilons and domains live in the AttributeSchema.
    """
    shift_scale: float
    interval_scale: float
    sensitivity: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.shift_scale <= 0 or self.interval_scale <= 0:
            raise ValueError("Timestamp noise scales must be positive")
        for name, value in self.sensitivity.items():
            if value <= 0:
                raise ValueError(f"Sensitivity of '{name}' must be positive, got {value}")


def laplace_mechanism(x: float, eps: float, sensitivity: float, bounds: Optional[Tuple[float, float]],
                      rng: np.random.Generator) -> float:
    """Add Laplace(0, sensitivity/eps) noise; with bounds, resample until inside them."""
    scale = sensitivity / eps
    if bounds is None:
        return float(x + rng.laplace(0.0, scale))
    low, high = bounds
    if not low <= x <= high:
        raise ValueError(f"{x} outside bounds {bounds}")
    while True:
        candidates = x + rng.laplace(0.0, scale, size=_BATCH)
        inside = candidates[(candidates >= low) & (candidates <= high)]
        if inside.size:
            return float(inside[0])


def keep_probability(eps: float) -> float:
    """e^eps / (1 + e^eps), computed without overflow."""
    return 1.0 / (1.0 + math.exp(-eps))


def binary_mechanism(b: bool, eps: float, rng: np.random.Generator) -> bool:
    """Randomized response: report b with probability e^eps / (1 + e^eps), else its negation."""
    return b if rng.random() < keep_probability(eps) else not b


def exponential_weights(index: int, utility: np.ndarray, eps: float) -> np.ndarray:
    """Output probabilities of the exponential mechanism for true value `index`."""
    spread = float(utility.max() - utility.min())
    if spread == 0:
        weights = np.zeros(utility.shape[1])
        weights[index] = 1.0
        return weights
    scores = eps * utility[index] / (2.0 * spread)
    weights = np.exp(scores - scores.max())
    return weights / weights.sum()


def exponential_mechanism(x: str, domain: Sequence[str], utility: Optional[Sequence[Sequence[float]]],
                          eps: float, rng: np.random.Generator) -> str:
    """Report a category with probability proportional to exp(eps * u(x, y) / (2 * spread of u)).

    Without a utility matrix, u(x, x) = 0 and u(x, y) = -1 otherwise.
    """
    try:
        index = list(domain).index(x)
    except ValueError as e:
        raise UnknownCategory(f"{x!r} is not in the domain") from e
    if utility is None:
        matrix = -1.0 + np.eye(len(domain))
    else:
        matrix = np.asarray(utility, dtype=float)
    weights = exponential_weights(index, matrix, eps)
    return domain[int(rng.choice(len(domain), p=weights))]


def _round(value: float) -> int:
    return math.floor(value + 0.5)


def anonymize_timestamps(trace: Trace, params: NoiseParams, rng: np.random.Generator) -> Trace:
    """Shift the whole trace by one Laplace draw, then perturb every interval.

    Interval noise is clamped to [-interval, +interval], so each new
    interval lies in [0, 2 * interval] and the order is preserved.
    """
    shift = _round(rng.laplace(0.0, params.shift_scale))
    events = trace.events
    timestamps = [events[0].ts + shift]
    for previous, current in zip(events, events[1:]):
        interval = current.ts - previous.ts
        noise = min(max(_round(rng.laplace(0.0, params.interval_scale)), -interval), interval)
        timestamps.append(timestamps[-1] + interval + noise)
    return Trace(trace.case_id, tuple(
        Event(event.activity, ts, event.payload) for event, ts in zip(events, timestamps)))


class AttributeAnonymizer:
    """Applies the mechanism matching each attribute's kind, with its own epsilon."""

    def __init__(self, schema: AttributeSchema, sensitivity: Optional[Mapping[str, float]] = None):
        self._schema = schema
        self._sensitivity = dict(sensitivity or {})
        self._utilities: Dict[str, List[List[float]]] = {
            name: schema[name].utility_matrix()
            for name in schema.names() if schema[name].kind == AttributeKind.CATEGORICAL
        }
        for name in self._sensitivity:
            if name not in schema:
                logger.warning("Sensitivity override for unknown attribute '%s' ignored", name)

    def sensitivity_of(self, name: str) -> Optional[float]:
        """Override if given, else the width of the attribute's domain."""
        if name in self._sensitivity:
            return self._sensitivity[name]
        bounds = self._schema[name].bounds
        return None if bounds is None else bounds[1] - bounds[0]

    def anonymize(self, name: str, value: AttributeValue, rng: np.random.Generator) -> AttributeValue:
        if value is None:
            return None
        spec = self._schema[name]
        if spec.kind == AttributeKind.BOOLEAN:
            return binary_mechanism(bool(value), spec.epsilon, rng)
        if spec.kind == AttributeKind.CATEGORICAL:
            return exponential_mechanism(str(value), spec.categories, self._utilities[name], spec.epsilon, rng)
        sensitivity = self.sensitivity_of(name)
        if sensitivity is None:
            # degenerate domain: the value is the same for everybody
            return value
        x = float(value)  # type: ignore[arg-type]
        if spec.bounds is not None:
            # overridden bounds may be narrower than the observed values
            x = min(max(x, spec.bounds[0]), spec.bounds[1])
        return laplace_mechanism(x, spec.epsilon, sensitivity, spec.bounds, rng)

    def anonymize_event(self, event: Event, rng: np.random.Generator) -> Event:
        payload = {name: self.anonymize(name, event.payload[name], rng) for name in sorted(event.payload)}
        return Event(event.activity, event.ts, payload)


def anonymize_log(log: EventLog, schema: AttributeSchema, params: NoiseParams, seed: int) -> EventLog:
    """Apply local DP to every timestamp and attribute value of the matched log.

    Trace i uses its own random stream derived from (seed, i); structure
    and activities stay unchanged.
    """
    anonymizer = AttributeAnonymizer(schema, params.sensitivity)
    traces = []
    for index, trace in enumerate(log.traces):
        rng = derive_rng(seed, Step.ANONYMIZE, index)
        shifted = anonymize_timestamps(trace, params, rng)
        traces.append(Trace(trace.case_id, tuple(anonymizer.anonymize_event(e, rng) for e in shifted.events)))
    return EventLog(tuple(traces), schema, log.activity_universe)
