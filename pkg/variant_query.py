"""Differentially private trace variant query.

A prefix tree over activity sequences is explored breadth-first. Every
candidate child of a kept prefix gets a Laplace-noised count; prefixes
whose noisy count reaches the pruning threshold k are kept and, below
depth n, expanded further. A reserved END child marks where variants
terminate, so a prefix and its extensions can both be released.

Each node draws its noise from its own stream, keyed by the node, so a
node's noisy count is the same whatever else was pruned.
"""
from collections import Counter, deque
from dataclasses import dataclass
import hashlib
import json
import logging
import math
from typing import Deque, Dict, List

import numpy as np

from eventlog import EventLog, Variant
from rng import Step, derive_rng

logger = logging.getLogger(__name__)

END = "\x00END"

# Released variant -> noisy frequency (always >= 1)
VariantBag = Dict[Variant, int]
# Released variants repeated by frequency, in random order
FlattenedVariants = List[Variant]


@dataclass(frozen=True)
class QueryParams:
    epsilon: float
    n: int = 30
    k: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")


def _true_counts(log: EventLog, n: int):
    """Count traces per prefix (up to length n) and per complete variant."""
    prefix_counts: Counter = Counter()
    end_counts: Counter = Counter()
    for variant, count in log.variants().items():
        for length in range(1, min(len(variant), n) + 1):
            prefix_counts[variant[:length]] += count
        if len(variant) <= n:
            end_counts[variant] += count
    return prefix_counts, end_counts


def node_key(node: Variant) -> int:
    """Stable 128-bit key of a tree node, independent of PYTHONHASHSEED."""
    encoded = json.dumps(list(node), ensure_ascii=False).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(encoded, digest_size=16).digest(), "big")


def node_rng(seed: int, node: Variant) -> np.random.Generator:
    return derive_rng(seed, Step.QUERY, node_key(node))


def noisy_count(true_count: int, epsilon: float, rng: np.random.Generator) -> int:
    """Round true_count + Laplace(0, 1/epsilon) to the nearest integer, clamped at 0."""
    return max(0, math.floor(true_count + rng.laplace(0.0, 1.0 / epsilon) + 0.5))


def trace_variant_query(log: EventLog, params: QueryParams) -> VariantBag:
    """Release the variant multiset of `log` through a noisy prefix tree.

    The noise of a node p.a (and of the END node p.END) comes from
    `node_rng(params.seed, ...)`, so raising k only removes variants.
    With many activities, a small epsilon and k=1, noise alone keeps
    many empty prefixes and the tree grows quickly; raise k in that case.
    """
    if END in log.activity_universe:
        raise ValueError(f"Activity label {END!r} is reserved")
    prefix_counts, end_counts = _true_counts(log, params.n)
    activities = sorted(log.activity_universe)

    bag: VariantBag = {}
    frontier: Deque[Variant] = deque([()])
    evaluated: Counter = Counter()
    kept: Counter = Counter()
    while frontier:
        prefix = frontier.popleft()
        if len(prefix) < params.n:
            for activity in activities:
                child = prefix + (activity,)
                evaluated[len(child)] += 1
                count = noisy_count(prefix_counts.get(child, 0), params.epsilon, node_rng(params.seed, child))
                if count >= params.k:
                    kept[len(child)] += 1
                    frontier.append(child)
        if prefix:
            terminal = prefix + (END,)
            count = noisy_count(end_counts.get(prefix, 0), params.epsilon, node_rng(params.seed, terminal))
            if count >= 1:
                bag[prefix] = count

    for depth in sorted(evaluated):
        logger.debug("Depth %d: %d prefixes evaluated, %d kept", depth, evaluated[depth], kept[depth])
    logger.info("Variant query released %d variants, %d sequences", len(bag), sum(bag.values()))
    return bag


def flatten(bag: VariantBag, rng: np.random.Generator) -> FlattenedVariants:
    """Repeat every variant by its count and shuffle the result."""
    sequences = [variant for variant in sorted(bag) for _ in range(bag[variant])]
    return [sequences[i] for i in rng.permutation(len(sequences))]
