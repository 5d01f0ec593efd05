import abc
from dataclasses import dataclass
import logging
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from eventlog import ActivityLabel, EventLog, Variant, variant_of

logger = logging.getLogger(__name__)

_TOLERANCE = 1e-9


def edit_distance(s1: Sequence[ActivityLabel], s2: Sequence[ActivityLabel]) -> int:
    """Levenshtein distance over activity symbols, unit costs."""
    previous = list(range(len(s2) + 1))
    for i, a in enumerate(s1, start=1):
        current = [i]
        for j, b in enumerate(s2, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (a != b)))
        previous = current
    return previous[-1]


def _distances_to_all(sequence: Sequence[int], codes: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Levenshtein distance from one encoded sequence to every row of `codes`.

    Rows are padded with -1 past their length; the distance to row r is
    read at column lengths[r].
    """
    rows, width = codes.shape
    previous = np.tile(np.arange(width + 1), (rows, 1))
    for i, symbol in enumerate(sequence, start=1):
        current = np.empty_like(previous)
        current[:, 0] = i
        substitution = previous[:, :-1] + (codes != symbol)
        deletion = previous[:, 1:] + 1
        best = np.minimum(substitution, deletion)
        # insertions chain along the row, so this part stays sequential
        for j in range(1, width + 1):
            current[:, j] = np.minimum(best[:, j - 1], current[:, j - 1] + 1)
        previous = current
    return previous[np.arange(rows), lengths]


@dataclass(frozen=True)
class CostMatrix:
    """Edit distance between every released sequence (row) and original trace (column)."""
    case_ids: Tuple[str, ...]
    cost: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.cost.shape  # type: ignore[return-value]


def build_cost_matrix(sequences: Sequence[Variant], log: EventLog) -> CostMatrix:
    """Compute the cost matrix, once per distinct (sequence, variant) pair."""
    case_ids = tuple(trace.case_id for trace in log.traces)
    if not sequences or not case_ids:
        return CostMatrix(case_ids, np.zeros((len(sequences), len(case_ids)), dtype=np.int64))

    trace_variants = [variant_of(trace) for trace in log.traces]
    distinct_variants = sorted(set(trace_variants))
    distinct_sequences = sorted(set(sequences))
    symbols = {a: code for code, a in enumerate(sorted({a for v in distinct_variants + distinct_sequences for a in v}))}

    width = max(len(v) for v in distinct_variants)
    codes = np.full((len(distinct_variants), width), -1, dtype=np.int64)
    for r, variant in enumerate(distinct_variants):
        codes[r, :len(variant)] = [symbols[a] for a in variant]
    lengths = np.array([len(v) for v in distinct_variants])

    distinct = np.vstack([
        _distances_to_all([symbols[a] for a in sequence], codes, lengths)
        for sequence in distinct_sequences
    ])
    variant_index = {v: c for c, v in enumerate(distinct_variants)}
    sequence_index = {s: r for r, s in enumerate(distinct_sequences)}
    rows = np.array([sequence_index[s] for s in sequences])
    columns = np.array([variant_index[v] for v in trace_variants])
    return CostMatrix(case_ids, distinct[np.ix_(rows, columns)])


@dataclass(frozen=True)
class Matching:
    """Partial injective map from sequence index to the case id that donates its context."""
    pairs: Dict[int, str]
    unmatched: FrozenSet[int]
    total_cost: int = 0


class Matcher(abc.ABC):

    @abc.abstractmethod
    def assign(self, cost: np.ndarray) -> List[Tuple[int, int]]:
        """Return (row, column) pairs of an injective assignment of min(rows, columns) pairs."""
        pass

    def match(self, matrix: CostMatrix) -> Matching:
        rows, _ = matrix.shape
        assignment = self.assign(matrix.cost)
        pairs = {row: matrix.case_ids[column] for row, column in assignment}
        total = int(sum(matrix.cost[row, column] for row, column in assignment))
        logger.debug("%s matched %d of %d sequences, total edit distance %d",
                     type(self).__name__, len(pairs), rows, total)
        return Matching(pairs, frozenset(set(range(rows)) - set(pairs)), total)


def _column_potentials(padded: np.ndarray, owner: np.ndarray) -> np.ndarray:
    """Dual values of the columns for an optimal perfect assignment.

    Bellman-Ford over the exchange graph, where column x links to column c
    with the cost change of moving owner[x] from x to c. Optimality means
    there is no negative cycle.
    """
    size = len(owner)
    weights = padded[owner] - padded[owner, np.arange(size)][:, None]
    potentials = np.zeros(size)
    for _ in range(size + 1):
        relaxed = np.minimum(potentials, (potentials[:, None] + weights).min(axis=0))
        if np.array_equal(relaxed, potentials):
            return potentials
        potentials = relaxed
    raise RuntimeError("Assignment is not optimal; the exchange graph has a negative cycle")


def _reachable(tight: np.ndarray, assigned: np.ndarray, movable: np.ndarray, target: int) -> np.ndarray:
    """Columns a row could take if the chain of displaced owners ends at `target`.

    Returns next_column, where next_column[x] is the column the owner of x
    moves to (-1 when x is not reachable, x itself for the target).
    """
    next_column = np.full(len(assigned), -1)
    next_column[target] = target
    seen = ~movable
    frontier = np.array([target])
    while frontier.size:
        hits = tight[:, frontier]
        rows = np.flatnonzero(hits.any(axis=1) & ~seen)
        seen[rows] = True
        columns = assigned[rows]
        next_column[columns] = frontier[hits[rows].argmax(axis=1)]
        frontier = columns
    return next_column


class OptimalMatcher(Matcher):
    """Minimum total edit distance via rectangular linear sum assignment.

    Among assignments of equal cost the one whose sorted (row, column)
    pairs are lexicographically lowest is returned. Every optimal
    assignment uses only zero reduced-cost pairs, so rows are fixed in
    order to the lowest column reachable through such pairs.
    """

    def assign(self, cost: np.ndarray) -> List[Tuple[int, int]]:
        if cost.size == 0:
            return []
        rows, columns = cost.shape
        size = max(rows, columns)
        # dummy rows and columns cost nothing; a row on a dummy column is unmatched
        padded = np.zeros((size, size))
        padded[:rows, :columns] = cost
        _, assigned = linear_sum_assignment(padded)
        owner = np.empty(size, dtype=np.int64)
        owner[assigned] = np.arange(size)

        potentials = _column_potentials(padded, owner)
        row_duals = padded[np.arange(size), assigned] - potentials[assigned]
        tight = np.abs(padded - row_duals[:, None] - potentials[None, :]) < _TOLERANCE

        movable = np.ones(size, dtype=bool)
        for row in range(rows):
            movable[row] = False
            target = int(assigned[row])
            next_column = _reachable(tight, assigned, movable, target)
            column = int(np.flatnonzero(tight[row] & (next_column >= 0))[0])
            # rotate the displaced owners along the chain back to target
            mover = owner[column]
            assigned[row], owner[column] = column, row
            while column != target:
                column = int(next_column[column])
                displaced = owner[column]
                assigned[mover], owner[column] = column, mover
                mover = displaced
        return [(row, int(assigned[row])) for row in range(rows) if assigned[row] < columns]


class GreedyMatcher(Matcher):
    """Sequences sorted by length, then activities, each take the nearest unused trace.

    Lowest column wins ties. Much faster than the optimal solver, not optimal.
    """

    def __init__(self, sequences: Sequence[Variant]):
        self._order = sorted(range(len(sequences)), key=lambda i: (len(sequences[i]), sequences[i], i))

    def assign(self, cost: np.ndarray) -> List[Tuple[int, int]]:
        _, columns = cost.shape
        used = np.zeros(columns, dtype=bool)
        pairs = []
        for row in self._order:
            if len(pairs) == columns:
                break
            candidates = np.where(used, np.iinfo(np.int64).max, cost[row])
            column = int(np.argmin(candidates))
            used[column] = True
            pairs.append((row, column))
        return sorted(pairs)


def optimal_matching(sequences: Sequence[Variant], log: EventLog) -> Matching:
    """Match released sequences to original traces minimizing total edit distance."""
    return OptimalMatcher().match(build_cost_matrix(sequences, log))
