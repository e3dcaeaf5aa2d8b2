"""Exhaustive reference results for small instances.

Slow by design: enumerates replica-set choices directly, with no flow
machinery, so the main engine can be checked against an independent answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .errors import InfeasibleError, OracleGuardError
from .layout import Assignment, ClusterSpec

MAX_PARTITIONS = 8
MAX_NODES = 6
DEFAULT_ASSIGNMENT_CAP = 10_000


@dataclass(frozen=True)
class OracleResult:
    best_size: int | None
    optimal_assignments: tuple[Assignment, ...]
    min_distance: int | None = None

    @property
    def feasible(self) -> bool:
        return self.best_size is not None


def _guard(spec: ClusterSpec) -> None:
    if spec.partition_count > MAX_PARTITIONS or len(spec.nodes) > MAX_NODES:
        raise OracleGuardError(
            f"instance too large for exhaustive search:"
            f" {len(spec.nodes)} nodes, {spec.partition_count} partitions"
            f" (limits: {MAX_NODES}, {MAX_PARTITIONS})"
        )


def _valid_replica_sets(spec: ClusterSpec) -> list[tuple[int, ...]]:
    """Every set of `replication` distinct nodes spanning enough zones,
    as index tuples, enumerated lexicographically over sorted node ids."""
    order = sorted(range(len(spec.nodes)), key=lambda i: spec.nodes[i].id)
    sets = []
    for combo in combinations(order, spec.replication):
        zones = {spec.nodes[i].zone for i in combo}
        if len(zones) >= spec.scattering:
            sets.append(combo)
    return sets


def _best_size_for_counts(spec: ClusterSpec, counts: list[int]) -> int:
    best = None
    for i, c in enumerate(counts):
        if c:
            size = spec.nodes[i].capacity // c
            if best is None or size < best:
                best = size
    return 0 if best is None else best


def _multisets(n_sets: int, length: int):
    """Non-decreasing index tuples: multisets of replica sets, lexicographic."""
    choice = [0] * length

    def rec(pos: int, start: int):
        if pos == length:
            yield tuple(choice)
            return
        for i in range(start, n_sets):
            choice[pos] = i
            yield from rec(pos + 1, i)

    yield from rec(0, 0)


def brute_force_optimal_size(
    spec: ClusterSpec, max_assignments: int = DEFAULT_ASSIGNMENT_CAP
) -> OracleResult:
    """Maximize the partition size over every valid assignment.

    The achieved size only depends on how many partitions land on each node,
    so multisets of replica sets are enumerated and expanded into concrete
    assignments (capped) only for the maximizers.
    """
    _guard(spec)
    sets = _valid_replica_sets(spec)
    p_count = spec.partition_count
    if not sets:
        return OracleResult(None, ())

    best = -1
    maximizers: list[tuple[int, ...]] = []
    counts = [0] * len(spec.nodes)
    for multiset in _multisets(len(sets), p_count):
        for si in multiset:
            for i in sets[si]:
                counts[i] += 1
        size = _best_size_for_counts(spec, counts)
        for si in multiset:
            for i in sets[si]:
                counts[i] -= 1
        if size > best:
            best = size
            maximizers = [multiset]
        elif size == best:
            maximizers.append(multiset)

    if best < 1:
        return OracleResult(None, ())

    assignments: list[Assignment] = []
    if max_assignments > 0:
        for multiset in maximizers:
            for arrangement in _distinct_arrangements(multiset):
                assignments.append(
                    Assignment(
                        partition_size=best,
                        replicas=tuple(
                            tuple(sorted(spec.nodes[i].id for i in sets[si]))
                            for si in arrangement
                        ),
                    )
                )
                if len(assignments) >= max_assignments:
                    return OracleResult(best, tuple(assignments))
    return OracleResult(best, tuple(assignments))


def _distinct_arrangements(multiset: tuple[int, ...]):
    """All distinct orderings of a multiset, lexicographically."""
    pool = sorted(multiset)

    def rec(remaining: list[int], prefix: list[int]):
        if not remaining:
            yield tuple(prefix)
            return
        last = None
        for i, v in enumerate(remaining):
            if v == last:
                continue
            last = v
            prefix.append(v)
            yield from rec(remaining[:i] + remaining[i + 1 :], prefix)
            prefix.pop()

    yield from rec(pool, [])


def brute_force_min_distance(
    spec: ClusterSpec, size: int, previous: Assignment
) -> int:
    """Minimum distance to `previous` over valid assignments achieving at
    least the given partition size."""
    _guard(spec)
    if size < 1:
        raise ValueError("size must be >= 1")
    if previous.partition_count != spec.partition_count:
        raise ValueError("previous assignment has the wrong partition count")
    sets = _valid_replica_sets(spec)
    if not sets:
        raise InfeasibleError("no valid replica set exists")
    p_count = spec.partition_count
    budgets = tuple(
        min(n.capacity // size, p_count) for n in spec.nodes
    )

    node_index = {n.id: i for i, n in enumerate(spec.nodes)}
    prev_sets = [
        frozenset(node_index[nid] for nid in replica_set if nid in node_index)
        for replica_set in previous.replicas
    ]
    set_members = [frozenset(s) for s in sets]

    NEG = float("-inf")
    memo: dict[tuple[int, tuple[int, ...]], float] = {}

    def solve(p: int, remaining: tuple[int, ...]) -> float:
        """Max total overlap with `previous` from partition p onward."""
        if p == p_count:
            return 0.0
        cap = p_count - p
        key = (p, tuple(min(b, cap) for b in remaining))
        hit = memo.get(key)
        if hit is not None:
            return hit
        best_here = NEG
        prev = prev_sets[p]
        for si, members in enumerate(set_members):
            ok = True
            for i in sets[si]:
                if remaining[i] == 0:
                    ok = False
                    break
            if not ok:
                continue
            nxt = list(remaining)
            for i in sets[si]:
                nxt[i] -= 1
            # -inf propagates through infeasible tails.
            score = len(members & prev) + solve(p + 1, tuple(nxt))
            if score > best_here:
                best_here = score
        memo[key] = best_here
        return best_here

    best_overlap = solve(0, budgets)
    if best_overlap == NEG:
        raise InfeasibleError(f"partition size {size} is not achievable")
    fixed = sum(
        spec.replication + len(set(replica_set))
        for replica_set in previous.replicas
    )
    return fixed - 2 * int(best_overlap)
