import unittest
from collections import Counter
import sys
import os

import numpy as np
from scipy import stats

# Add the root directory to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from enrichment import (EmptyDistributions, enrich_log, enrich_matched, enrich_unmatched,  # noqa: E402
                        sample_delta)
from eventlog import (AttributeSchema, EmpiricalDistributions, Event, EventLog, Trace,  # noqa: E402
                      collect_distributions, variant_of)

SCHEMA = AttributeSchema.from_dict({
    "age": {"kind": "numeric", "min": 0, "max": 120},
    "group": {"kind": "categorical", "categories": ["A", "B", "C"]},
})


def make_trace(case_id, *steps):
    return Trace(case_id, tuple(Event(*step) for step in steps))


def make_dists(pair_deltas=None, global_deltas=(), first_event_ts=(0,), attr_pools=None):
    return EmpiricalDistributions(pair_deltas or {}, tuple(global_deltas), tuple(first_event_ts), attr_pools or {})


def hospital_log():
    return EventLog.build([
        make_trace("p1", ("R", 0, {"age": 37.0, "group": "A"}), ("T", 60, {"group": "B"}), ("S", 600)),
        make_trace("p2", ("R", 1000, {"age": 55.0}), ("S", 1300, {"group": "C"})),
        make_trace("p3", ("R", 2000, {"age": 81.0}), ("T", 2010), ("T", 2050), ("A", 2400)),
    ], SCHEMA)


def random_trace(rng, case_id):
    length = int(rng.integers(1, 8))
    activities = rng.choice(["R", "T", "S", "A"], size=length)
    timestamps = np.cumsum(rng.integers(0, 50, size=length))
    return Trace(case_id, tuple(
        Event(str(a), int(ts), {"age": float(rng.integers(0, 121))}) for a, ts in zip(activities, timestamps)))


class TestSampleDelta(unittest.TestCase):

    def test_singleton_pool(self):
        dists = make_dists({("A", "B"): (10,)}, (10, 99))
        rng = np.random.default_rng(0)
        self.assertTrue(all(sample_delta(dists, "A", "B", rng) == 10 for _ in range(50)))

    def test_absent_pair_falls_back_to_all_deltas(self):
        dists = make_dists({("A", "B"): (5,), ("B", "C"): (15,)}, (5, 15))
        rng = np.random.default_rng(1)
        draws = Counter(sample_delta(dists, "C", "A", rng) for _ in range(10_000))
        self.assertEqual(set(draws), {5, 15})
        self.assertGreater(stats.chisquare([draws[5], draws[15]]).pvalue, 0.01)

    def test_no_deltas(self):
        with self.assertRaises(EmptyDistributions):
            sample_delta(make_dists(), "A", "B", np.random.default_rng(0))


class TestEnrichMatched(unittest.TestCase):

    def setUp(self):
        self.log = hospital_log()
        self.dists = collect_distributions(self.log)

    def test_identity_when_sigma_is_the_variant(self):
        for trace in self.log.traces:
            result = enrich_matched(variant_of(trace), trace, self.dists, np.random.default_rng(0))
            self.assertEqual(result.events, trace.events)

    def test_inserted_event_gets_resampled_context(self):
        xi = self.log.traces[1]
        result = enrich_matched(("R", "T", "S"), xi, self.dists, np.random.default_rng(4), case_id="case_0001")
        self.assertEqual(variant_of(result), ("R", "T", "S"))
        self.assertEqual(result.case_id, "case_0001")
        registration, triage, surgery = result.events
        self.assertEqual(registration, xi.events[0])
        self.assertEqual(surgery.payload, xi.events[1].payload)
        # (R, T) was observed 60 ms and 10 ms apart
        self.assertIn(triage.ts - registration.ts, (60, 10))
        self.assertIn(triage.payload["age"], self.dists.attr_pools["age"])
        self.assertIn(triage.payload["group"], self.dists.attr_pools["group"])
        self.assertLessEqual(triage.ts, surgery.ts)

    def test_prefix_projection(self):
        xi = self.log.traces[0]
        result = enrich_matched(("R",), xi, self.dists, np.random.default_rng(0))
        self.assertEqual(result.events, (xi.events[0],))

    def test_repeated_activity_uses_nth_occurrence(self):
        xi = self.log.traces[2]
        result = enrich_matched(("R", "T", "T", "T"), xi, self.dists, np.random.default_rng(0))
        self.assertEqual(result.events[1], xi.events[1])
        self.assertEqual(result.events[2], xi.events[2])
        # no fourth T in xi: the (T, T) duration observed in the log is 40 ms
        self.assertEqual(result.events[3].ts, 2090)

    def test_earlier_donor_timestamp_is_replaced(self):
        xi = make_trace("x", ("S", 100), ("R", 200))
        dists = make_dists({("R", "S"): (7,)}, (7,))
        result = enrich_matched(("R", "S"), xi, dists, np.random.default_rng(0))
        self.assertEqual([e.ts for e in result.events], [200, 207])
        self.assertEqual(result.events[1].payload, xi.events[0].payload)

    def test_invariants_on_random_pairs(self):
        rng = np.random.default_rng(99)
        log = EventLog.build([random_trace(rng, f"c{i}") for i in range(30)], SCHEMA)
        dists = collect_distributions(log)
        for _ in range(10_000):
            xi = log.traces[int(rng.integers(len(log)))]
            sigma = tuple(str(a) for a in rng.choice(["R", "T", "S", "A"], size=int(rng.integers(1, 8))))
            result = enrich_matched(sigma, xi, dists, rng)
            self.assertEqual(variant_of(result), sigma)
            self.assertTrue(all(a.ts <= b.ts for a, b in zip(result.events, result.events[1:])))
            if all(a.ts < b.ts for a, b in zip(xi.events, xi.events[1:])):
                own = enrich_matched(variant_of(xi), xi, dists, rng)
                self.assertEqual(own.events, xi.events)


class TestEnrichUnmatched(unittest.TestCase):

    def test_singleton_pools(self):
        dists = make_dists(first_event_ts=(42,))
        result = enrich_unmatched(("A",), dists, np.random.default_rng(0))
        self.assertEqual([e.ts for e in result.events], [42])

    def test_length_and_order(self):
        dists = collect_distributions(hospital_log())
        sigma = ("R", "T", "X", "S", "S")
        result = enrich_unmatched(sigma, dists, np.random.default_rng(7), case_id="case_0009")
        self.assertEqual(variant_of(result), sigma)
        self.assertEqual(result.case_id, "case_0009")
        self.assertIn(result.events[0].ts, dists.first_event_ts)
        self.assertTrue(all(a.ts <= b.ts for a, b in zip(result.events, result.events[1:])))

    def test_attribute_frequencies_follow_pool(self):
        pool = ("A", "A", "A", "B", "C", "C")
        dists = make_dists(attr_pools={"group": pool})
        rng = np.random.default_rng(12)
        draws = Counter(enrich_unmatched(("R",), dists, rng).events[0].payload["group"] for _ in range(10_000))
        expected = Counter(pool)
        observed = [draws[c] for c in "ABC"]
        frequencies = [10_000 * expected[c] / len(pool) for c in "ABC"]
        self.assertGreater(stats.chisquare(observed, frequencies).pvalue, 0.01)

    def test_single_event_log_has_no_deltas(self):
        dists = collect_distributions(EventLog.build([make_trace("c", ("A", 5))]))
        with self.assertRaises(EmptyDistributions):
            enrich_unmatched(("A", "A"), dists, np.random.default_rng(0))


class TestEnrichLog(unittest.TestCase):

    def setUp(self):
        self.log = hospital_log()

    def test_true_variants_reproduce_the_variant_multiset(self):
        sequences = [variant_of(trace) for trace in reversed(self.log.traces)]
        matched = enrich_log(sequences, self.log, seed=1)
        self.assertEqual(matched.variants(), self.log.variants())
        # exact matches donate everything
        by_variant = {variant_of(t): t for t in self.log.traces}
        for trace in matched.traces:
            self.assertEqual(trace.events, by_variant[variant_of(trace)].events)

    def test_output_follows_sequences(self):
        sequences = [("R", "S"), ("R", "T", "S"), ("R",), ("A", "A"), ("R", "T", "T", "A"), ("S",)]
        matched = enrich_log(sequences, self.log, seed=3)
        self.assertEqual(len(matched), len(sequences))
        self.assertEqual([variant_of(t) for t in matched.traces], sequences)
        self.assertEqual([t.case_id for t in matched.traces], [f"case_000{i}" for i in range(1, 7)])
        self.assertEqual(matched.schema, self.log.schema)

    def test_empty_sequences(self):
        matched = enrich_log([], self.log, seed=0)
        self.assertEqual(len(matched), 0)

    def test_deterministic_and_greedy(self):
        sequences = [("R", "S"), ("R", "T", "S"), ("T",), ("R", "A")]
        first = enrich_log(sequences, self.log, seed=5)
        self.assertEqual(first, enrich_log(sequences, self.log, seed=5))
        greedy = enrich_log(sequences, self.log, seed=5, matching_mode="greedy")
        self.assertEqual([variant_of(t) for t in greedy.traces], sequences)

    def test_unknown_matching_mode(self):
        with self.assertRaises(ValueError):
            enrich_log([("R",)], self.log, seed=0, matching_mode="fastest")


if __name__ == '__main__':
    unittest.main()
