import math
import unittest
from collections import Counter
import sys
import os

import numpy as np
from scipy import stats

# Add the root directory to the Python path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from eventlog import AttributeKind, AttributeSchema, AttributeSpec, Event, EventLog, Trace, variant_of  # noqa: E402
from mechanisms import (AttributeAnonymizer, NoiseParams, UnknownCategory, anonymize_log,  # noqa: E402
                        anonymize_timestamps, binary_mechanism, exponential_mechanism,
                        exponential_weights, keep_probability, laplace_mechanism)
from metrics import boolean_fraction  # noqa: E402

QUIET = NoiseParams(shift_scale=1e-9, interval_scale=1e-9)


def sigmoid(eps):
    return math.exp(eps) / (1 + math.exp(eps))


def random_trace(rng, case_id="c"):
    length = int(rng.integers(1, 10))
    timestamps = np.cumsum(rng.integers(0, 10_000, size=length))
    return Trace(case_id, tuple(Event("A", int(ts)) for ts in timestamps))


class TestNoiseParams(unittest.TestCase):

    def test_scales_must_be_positive(self):
        with self.assertRaises(ValueError):
            NoiseParams(shift_scale=0, interval_scale=1)
        with self.assertRaises(ValueError):
            NoiseParams(shift_scale=1, interval_scale=1, sensitivity={"age": -1})


class TestLaplaceMechanism(unittest.TestCase):

    def test_vanishing_noise(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            self.assertAlmostEqual(laplace_mechanism(37, 1e9, 120, (0, 120), rng), 37, delta=1e-3 * 120)

    def test_bounded_output_stays_in_domain(self):
        rng = np.random.default_rng(1)
        draws = [laplace_mechanism(37, 0.1, 120, (0, 120), rng) for _ in range(1_000_000)]
        self.assertGreaterEqual(min(draws), 0)
        self.assertLessEqual(max(draws), 120)

    def test_unbounded_variance(self):
        rng = np.random.default_rng(2)
        sensitivity, eps = 10.0, 0.5
        draws = np.array([laplace_mechanism(0.0, eps, sensitivity, None, rng) for _ in range(100_000)])
        expected = 2 * (sensitivity / eps) ** 2
        self.assertLess(abs(draws.var() - expected) / expected, 0.05)

    def test_median_of_symmetric_domain(self):
        rng = np.random.default_rng(3)
        sensitivity, eps, n = 100.0, 1.0, 100_000
        draws = [laplace_mechanism(50.0, eps, sensitivity, (0.0, 100.0), rng) for _ in range(n)]
        self.assertLess(abs(np.median(draws) - 50.0), 3 * sensitivity / (eps * math.sqrt(n)))

    def test_value_outside_bounds(self):
        with self.assertRaises(ValueError):
            laplace_mechanism(200, 1.0, 120, (0, 120), np.random.default_rng(0))


class TestBinaryMechanism(unittest.TestCase):

    def test_keep_rate(self):
        rng = np.random.default_rng(4)
        for eps in (0.1, 0.5, 1.0, 1.5, 2.0):
            kept = sum(binary_mechanism(True, eps, rng) for _ in range(100_000)) / 100_000
            self.assertAlmostEqual(kept, sigmoid(eps), delta=0.01)

    def test_ln3_keeps_three_quarters(self):
        self.assertAlmostEqual(keep_probability(math.log(3)), 0.75)

    def test_privacy_ratio(self):
        rng = np.random.default_rng(5)
        n = 100_000
        for eps in (0.5, 1.0, 2.0):
            true_given_true = sum(binary_mechanism(True, eps, rng) for _ in range(n)) / n
            true_given_false = sum(binary_mechanism(False, eps, rng) for _ in range(n)) / n
            self.assertAlmostEqual(math.log(true_given_true / true_given_false), eps, delta=0.05)

    def test_no_noise_limit(self):
        rng = np.random.default_rng(6)
        self.assertTrue(all(binary_mechanism(b, 1e9, rng) == b for b in (True, False) * 100))


class TestExponentialMechanism(unittest.TestCase):

    def test_single_category(self):
        rng = np.random.default_rng(0)
        self.assertTrue(all(exponential_mechanism("a", ["a"], None, 0.1, rng) == "a" for _ in range(100)))

    def test_no_noise_limit(self):
        rng = np.random.default_rng(0)
        domain = ["a", "b", "c"]
        self.assertTrue(all(exponential_mechanism(x, domain, None, 1e9, rng) == x for x in domain * 30))

    def test_unknown_category(self):
        with self.assertRaises(UnknownCategory):
            exponential_mechanism("z", ["a", "b"], None, 1.0, np.random.default_rng(0))

    def test_default_utility_keep_probability(self):
        for size, eps in ((2, 1.0), (3, 1.0), (5, 2.0)):
            weights = exponential_weights(0, -1.0 + np.eye(size), eps)
            expected = math.exp(eps / 2) / (math.exp(eps / 2) + size - 1)
            self.assertAlmostEqual(weights[0], expected)

    def test_frequencies_match_weights(self):
        rng = np.random.default_rng(8)
        n = 30_000
        for size, eps in ((2, 0.5), (3, 1.0), (5, 2.0)):
            domain = [str(i) for i in range(size)]
            draws = Counter(exponential_mechanism("0", domain, None, eps, rng) for _ in range(n))
            keep = math.exp(eps / 2) / (math.exp(eps / 2) + size - 1)
            expected = [n * keep] + [n * (1 - keep) / (size - 1)] * (size - 1)
            observed = [draws[c] for c in domain]
            self.assertGreater(stats.chisquare(observed, expected).pvalue, 0.01)

    def test_custom_utility_prefers_close_substitutes(self):
        utility = [[0, -0.1, -1], [-0.1, 0, -1], [-1, -1, 0]]
        weights = exponential_weights(0, np.array(utility, dtype=float), 4.0)
        self.assertGreater(weights[0], weights[1])
        self.assertGreater(weights[1], weights[2])


class TestAnonymizeTimestamps(unittest.TestCase):

    def test_single_event_is_only_shifted(self):
        trace = Trace("c", (Event("A", 1000),))
        params = NoiseParams(shift_scale=500, interval_scale=500)
        shift = math.floor(np.random.default_rng(9).laplace(0, 500) + 0.5)
        result = anonymize_timestamps(trace, params, np.random.default_rng(9))
        self.assertEqual(result.events[0].ts, 1000 + shift)

    def test_zero_intervals_stay_zero(self):
        trace = Trace("c", tuple(Event(a, 5000) for a in "ABCD"))
        result = anonymize_timestamps(trace, NoiseParams(1000, 1000), np.random.default_rng(1))
        self.assertEqual(len({e.ts for e in result.events}), 1)

    def test_order_and_interval_bounds(self):
        rng = np.random.default_rng(10)
        params = NoiseParams(shift_scale=60_000, interval_scale=5_000)
        for seed in range(10_000):
            trace = random_trace(rng)
            shift = math.floor(np.random.default_rng(seed).laplace(0, params.shift_scale) + 0.5)
            result = anonymize_timestamps(trace, params, np.random.default_rng(seed))
            self.assertEqual(result.events[0].ts, trace.events[0].ts + shift)
            self.assertEqual(variant_of(result), variant_of(trace))
            for before, after, new_before, new_after in zip(trace.events, trace.events[1:],
                                                             result.events, result.events[1:]):
                interval = after.ts - before.ts
                self.assertTrue(0 <= new_after.ts - new_before.ts <= 2 * interval)


def boolean_log(cases, true_fraction, epsilon=1.0):
    schema = AttributeSchema({"infection": AttributeSpec("infection", AttributeKind.BOOLEAN, epsilon)})
    trues = int(round(cases * true_fraction))
    return EventLog.build([
        Trace(f"c{i}", (Event("Registration", i * 1000, {"infection": i < trues}), Event("Triage", i * 1000 + 60)))
        for i in range(cases)
    ], schema)


class TestAnonymizeLog(unittest.TestCase):

    def test_structure_is_preserved(self):
        schema = AttributeSchema.from_dict({
            "age": {"kind": "numeric", "min": 0, "max": 120, "epsilon": 0.5},
            "group": {"kind": "categorical", "categories": ["A", "B"]},
            "flag": {"kind": "boolean"},
        })
        log = EventLog.build([
            Trace("x", (Event("R", 0, {"age": 37.0, "group": "A", "flag": True}), Event("T", 100, {"flag": False}))),
            Trace("y", (Event("R", 50, {"group": "B"}),)),
        ], schema)
        result = anonymize_log(log, schema, NoiseParams(1000, 100), seed=3)
        self.assertEqual(len(result), len(log))
        self.assertEqual(result.variants(), log.variants())
        self.assertEqual([t.case_id for t in result.traces], ["x", "y"])
        # missing values stay missing
        self.assertEqual(set(result.traces[0].events[1].payload), {"flag"})
        self.assertEqual(set(result.traces[1].events[0].payload), {"group"})
        age = result.traces[0].events[0].payload["age"]
        self.assertTrue(0 <= age <= 120)

    def test_no_attributes_only_timestamps_change(self):
        log = EventLog.build([Trace("x", (Event("R", 0), Event("T", 10_000)))])
        result = anonymize_log(log, log.schema, NoiseParams(5000, 1000), seed=1)
        self.assertEqual([e.payload for e in result.traces[0].events], [{}, {}])
        self.assertNotEqual([e.ts for e in result.traces[0].events], [0, 10_000])

    def test_no_noise_limit(self):
        schema = AttributeSchema.from_dict({
            "age": {"kind": "numeric", "min": 0, "max": 120, "epsilon": 1e9},
            "group": {"kind": "categorical", "categories": ["A", "B"], "epsilon": 1e9},
            "flag": {"kind": "boolean", "epsilon": 1e9},
        })
        log = EventLog.build([Trace("x", (Event("R", 0, {"age": 37.0, "group": "B", "flag": True}),
                                          Event("T", 10_000, {"flag": False})))], schema)
        result = anonymize_log(log, schema, QUIET, seed=2)
        first, second = result.traces[0].events
        self.assertEqual([first.ts, second.ts], [0, 10_000])
        self.assertAlmostEqual(first.payload["age"], 37.0, delta=0.12)
        self.assertEqual((first.payload["group"], first.payload["flag"], second.payload["flag"]), ("B", True, False))

    def test_degenerate_numeric_domain_passes_through(self):
        schema = AttributeSchema({"ward": AttributeSpec("ward", AttributeKind.NUMERIC, 1.0)})
        log = EventLog.build([Trace("x", (Event("R", 0, {"ward": 4.0}),))], schema)
        result = anonymize_log(log, schema, QUIET, seed=0)
        self.assertEqual(result.traces[0].events[0].payload["ward"], 4.0)

    def test_sensitivity_override(self):
        schema = AttributeSchema.from_dict({"age": {"kind": "numeric", "min": 0, "max": 120}})
        anonymizer = AttributeAnonymizer(schema, {"age": 10.0})
        self.assertEqual(anonymizer.sensitivity_of("age"), 10.0)
        self.assertEqual(AttributeAnonymizer(schema).sensitivity_of("age"), 120.0)

    def test_deterministic_given_seed(self):
        log = boolean_log(50, 0.5)
        params = NoiseParams(1000, 100)
        self.assertEqual(anonymize_log(log, log.schema, params, 4), anonymize_log(log, log.schema, params, 4))
        self.assertNotEqual(anonymize_log(log, log.schema, params, 4), anonymize_log(log, log.schema, params, 5))

    def test_boolean_fraction_in_expectation(self):
        for eps in (0.1, 0.5, 2.0):
            log = boolean_log(1000, 0.81, eps)
            fractions = [boolean_fraction(anonymize_log(log, log.schema, QUIET, seed), "infection")
                         for seed in range(50)]
            expected = 0.81 * sigmoid(eps) + 0.19 * (1 - sigmoid(eps))
            self.assertAlmostEqual(np.mean(fractions), expected, delta=0.02)


if __name__ == '__main__':
    unittest.main()
