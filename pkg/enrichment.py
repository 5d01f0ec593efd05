"""Sequence enrichment.

Released activity sequences are turned back into traces by borrowing
attribute values and timestamps from the original trace each one is
matched to. Sequences without a match, and events without a
counterpart in their matched trace, are filled by resampling the
original log's empirical distributions.
"""
from collections import defaultdict
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from eventlog import (ActivityLabel, AttributeValue, EmpiricalDistributions, Event, EventLog,
                      EventLogError, Trace, Variant, collect_distributions)
from matching import GreedyMatcher, Matcher, OptimalMatcher, build_cost_matrix
from rng import Step, derive_rng

logger = logging.getLogger(__name__)


class EmptyDistributions(EventLogError):
    """Raised when a timestamp must be resampled but the original log has no pool to draw from."""


def _draw(pool: Sequence, rng: np.random.Generator):
    return pool[int(rng.integers(len(pool)))]


def sample_delta(dists: EmpiricalDistributions, a_prev: ActivityLabel, a_next: ActivityLabel,
                 rng: np.random.Generator) -> int:
    """Draw the duration between an a_prev event and a following a_next event.

    Falls back to all observed durations when the pair never occurred.
    """
    pool = dists.pair_deltas.get((a_prev, a_next)) or dists.global_deltas
    if not pool:
        raise EmptyDistributions("The original log has no consecutive events to draw durations from")
    return int(_draw(pool, rng))


def sample_start(dists: EmpiricalDistributions, rng: np.random.Generator) -> int:
    if not dists.first_event_ts:
        raise EmptyDistributions("The original log has no traces to draw start timestamps from")
    return int(_draw(dists.first_event_ts, rng))


def sample_payload(dists: EmpiricalDistributions, rng: np.random.Generator) -> Dict[str, AttributeValue]:
    """Draw one value per attribute from the original log's value pools."""
    return {name: _draw(dists.attr_pools[name], rng)
            for name in sorted(dists.attr_pools) if dists.attr_pools[name]}


def _next_ts(events: List[Event], activity: ActivityLabel, dists: EmpiricalDistributions,
             rng: np.random.Generator) -> int:
    if not events:
        return sample_start(dists, rng)
    return events[-1].ts + sample_delta(dists, events[-1].activity, activity, rng)


def enrich_matched(sigma: Variant, xi: Trace, dists: EmpiricalDistributions,
                   rng: np.random.Generator, case_id: Optional[str] = None) -> Trace:
    """Build a trace for `sigma` from the context of its matched trace `xi`.

    The k-th occurrence of an activity in sigma takes its attribute values
    from the k-th occurrence in xi, and its timestamp too while that keeps
    the trace strictly later than its last event. Other timestamps follow
    the previous event by a resampled duration; events without a
    counterpart in xi get resampled attribute values.
    """
    occurrences: Dict[ActivityLabel, List[Event]] = defaultdict(list)
    for event in xi.events:
        occurrences[event.activity].append(event)

    events: List[Event] = []
    seen: Dict[ActivityLabel, int] = defaultdict(int)
    for activity in sigma:
        k_sigma = seen[activity]
        seen[activity] += 1
        if k_sigma < len(occurrences[activity]):
            source = occurrences[activity][k_sigma]
            payload = dict(source.payload)
            if not events or source.ts > events[-1].ts:
                ts = source.ts
            else:
                ts = _next_ts(events, activity, dists, rng)
        else:
            payload = sample_payload(dists, rng)
            ts = _next_ts(events, activity, dists, rng)
        events.append(Event(activity, ts, payload))
    return Trace(case_id if case_id is not None else xi.case_id, tuple(events))


def enrich_unmatched(sigma: Variant, dists: EmpiricalDistributions, rng: np.random.Generator,
                     case_id: str = "case_unmatched") -> Trace:
    """Build a trace for `sigma` purely from the resampling pools."""
    events: List[Event] = []
    for activity in sigma:
        ts = _next_ts(events, activity, dists, rng)
        events.append(Event(activity, ts, sample_payload(dists, rng)))
    return Trace(case_id, tuple(events))


def case_ids(count: int) -> List[str]:
    """Fresh sequential case ids: case_0001, case_0002, ..."""
    width = max(4, len(str(count)))
    return [f"case_{i:0{width}d}" for i in range(1, count + 1)]


def make_matcher(mode: str, sequences: Sequence[Variant]) -> Matcher:
    if mode == "optimal":
        return OptimalMatcher()
    if mode == "greedy":
        return GreedyMatcher(sequences)
    raise ValueError(f"Unknown matching mode '{mode}'")


def enrich_log(sequences: Sequence[Variant], log: EventLog, seed: int,
               matching_mode: str = "optimal") -> EventLog:
    """Build the matched log: one enriched trace per released sequence.

    Sequence i draws from its own random stream derived from (seed, i).
    """
    if not sequences:
        return EventLog.build((), log.schema, log.activity_universe)

    dists = collect_distributions(log)
    matrix = build_cost_matrix(sequences, log)
    matching = make_matcher(matching_mode, sequences).match(matrix)
    logger.info("Matched %d sequences (%d unmatched), total edit distance %d",
                len(matching.pairs), len(matching.unmatched), matching.total_cost)

    traces_by_id = {trace.case_id: trace for trace in log.traces}
    traces = []
    for index, (sigma, case_id) in enumerate(zip(sequences, case_ids(len(sequences)))):
        rng = derive_rng(seed, Step.ENRICH, index)
        donor = matching.pairs.get(index)
        if donor is None:
            traces.append(enrich_unmatched(sigma, dists, rng, case_id))
        else:
            traces.append(enrich_matched(sigma, traces_by_id[donor], dists, rng, case_id))
    return EventLog.build(traces, log.schema, log.activity_universe)
