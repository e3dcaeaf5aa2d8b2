"""Cluster model and the three-step layout computation.

Step 1 finds the largest feasible partition size by dichotomy over max-flow
feasibility. Step 2 computes a candidate placement, warm-started from the
previous assignment when one exists. Step 3 cancels negative residual cycles
until the placement is as close as possible to the previous one.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from typing import Sequence

from .errors import InfeasibleError, PreviousLayoutError, SpecError
from .flowgraph import (
    NODE_KIND,
    SINK,
    SOURCE,
    ZONE_SLOT_KIND,
    FlowNetwork,
    VertexId,
    apply_cycle_inplace,
    detect_negative_cycles,
    flow_value,
    max_flow,
    node_vertex,
    residual_cost_graph,
    spread_vertex,
    surplus_vertex,
    zone_slot_vertex,
)

MAX_PARTITION_BITS = 16


@dataclass(frozen=True)
class NodeSpec:
    id: str
    zone: str
    capacity: int


@dataclass(frozen=True)
class ClusterSpec:
    """Cluster description: nodes with zones and capacities, the replication
    factor (distinct nodes per partition), the scattering factor (minimum
    distinct zones per partition), and the partition-bit count."""

    nodes: tuple[NodeSpec, ...]
    replication: int
    scattering: int
    partition_bits: int

    def __post_init__(self):
        if self.replication < 1:
            raise SpecError("replication must be >= 1")
        if not 1 <= self.scattering <= self.replication:
            raise SpecError("scattering must satisfy 1 <= scattering <= replication")
        if not 1 <= self.partition_bits <= MAX_PARTITION_BITS:
            raise SpecError(f"partition_bits must be in [1, {MAX_PARTITION_BITS}]")
        seen = set()
        for n in self.nodes:
            if not n.id:
                raise SpecError("node ids must be non-empty")
            if n.id in seen:
                raise SpecError(f"duplicate node id {n.id!r}")
            seen.add(n.id)
            if not n.zone:
                raise SpecError(f"node {n.id!r} has an empty zone")
            if n.capacity < 0:
                raise SpecError(f"node {n.id!r} has negative capacity")

    @property
    def partition_count(self) -> int:
        return 1 << self.partition_bits

    @property
    def zone_names(self) -> tuple[str, ...]:
        return tuple(sorted({n.zone for n in self.nodes}))

    @property
    def total_capacity(self) -> int:
        return sum(n.capacity for n in self.nodes)

    def check_feasible_shape(self) -> None:
        """Reject specs that cannot host any assignment, before any flow runs.

        Zero-capacity nodes are allowed (e.g. gateway machines) but do not
        count toward the replication/scattering minimums.
        """
        usable = [n for n in self.nodes if n.capacity > 0]
        if len(usable) < self.replication:
            raise InfeasibleError(
                f"{len(usable)} node(s) with capacity, {self.replication} required"
            )
        zones = {n.zone for n in usable}
        if len(zones) < self.scattering:
            raise InfeasibleError(
                f"{len(zones)} zone(s) with capacity, {self.scattering} required"
            )


@dataclass(frozen=True)
class Assignment:
    """Replica map: for each partition, the node ids holding it, plus the
    common partition size the map was computed for.

    Instances loaded from old layouts may not satisfy the current spec;
    `validate` reports every violation instead of refusing construction.
    """

    partition_size: int
    replicas: tuple[tuple[str, ...], ...]

    @property
    def partition_count(self) -> int:
        return len(self.replicas)

    def validate(self, spec: ClusterSpec) -> list[str]:
        problems = []
        if len(self.replicas) != spec.partition_count:
            problems.append(
                f"assignment covers {len(self.replicas)} partitions,"
                f" spec expects {spec.partition_count}"
            )
        if self.partition_size < 1:
            problems.append("partition size must be >= 1")
        by_id = {n.id: n for n in spec.nodes}
        counts: dict[str, int] = {}
        for p, replica_set in enumerate(self.replicas):
            if len(set(replica_set)) != len(replica_set):
                problems.append(f"partition {p}: duplicate node in replica list")
            if len(set(replica_set)) != spec.replication:
                problems.append(
                    f"partition {p}: {len(set(replica_set))} distinct nodes,"
                    f" expected {spec.replication}"
                )
            zones = set()
            for node_id in replica_set:
                node = by_id.get(node_id)
                if node is None:
                    problems.append(f"partition {p}: unknown node {node_id!r}")
                    continue
                zones.add(node.zone)
                counts[node_id] = counts.get(node_id, 0) + 1
            if len(zones) < spec.scattering and not any(
                by_id.get(n) is None for n in replica_set
            ):
                problems.append(
                    f"partition {p}: replicas span {len(zones)} zone(s),"
                    f" expected >= {spec.scattering}"
                )
        if self.partition_size >= 1:
            for node_id, held in sorted(counts.items()):
                node = by_id.get(node_id)
                if node is None:
                    continue
                slots = node.capacity // self.partition_size
                if held > slots:
                    problems.append(
                        f"node {node_id}: holds {held} partitions,"
                        f" capacity {node.capacity} allows {slots}"
                        f" at size {self.partition_size}"
                    )
        return problems


@dataclass(frozen=True)
class NodeUse:
    partitions: int
    slots: int
    capacity: int
    stored: int
    utilization: float


@dataclass(frozen=True)
class ZoneUse:
    partitions: int
    slots: int
    utilization: float


@dataclass(frozen=True)
class LayoutMetrics:
    """Report accompanying a computed layout.

    `ideal_size` is the effective capacity one could hope for from the raw
    total (total capacity split over the replication factor); the unusable
    percentage compares what the layout actually stores against that total.
    Fields about the previous assignment are None on a fresh computation.
    """

    optimal_size: int
    ideal_size: int
    total_capacity: int
    unusable_capacity_pct: float
    node_utilization: dict[str, NodeUse]
    zone_utilization: dict[str, ZoneUse]
    saturated_nodes: tuple[str, ...]
    saturated_zones: tuple[str, ...]
    distance_to_previous: int | None = None
    partition_transfers: int | None = None
    candidate_flow_restricted: int | None = None
    transfer_min_converged: bool | None = None


def partition_of_hash(hash_bytes: Sequence[int] | bytes, k: int) -> int:
    """Partition index from the k most significant bits of a block hash."""
    if not 1 <= k <= MAX_PARTITION_BITS:
        raise ValueError(f"k must be in [1, {MAX_PARTITION_BITS}]")
    needed = (k + 7) // 8
    if len(hash_bytes) < needed:
        raise ValueError(f"hash too short: {len(hash_bytes)} byte(s), need {needed}")
    value = int.from_bytes(bytes(hash_bytes[:needed]), "big")
    return value >> (8 * needed - k)


def build_graph(spec: ClusterSpec, s: int) -> FlowNetwork:
    """Build the feasibility network for partition size `s`, with zero flow.

    A maximal flow saturates the source arcs exactly when an assignment at
    size `s` exists: each partition pushes `scattering` units through its
    spread head (one per zone slot, forcing distinct zones) and the remaining
    replicas through its surplus head, unit arcs from zone slots to nodes keep
    replicas on distinct nodes, and each node passes at most capacity//s
    partitions to the sink.
    """
    if s < 1:
        raise ValueError("partition size must be >= 1")
    p_count = spec.partition_count
    zones = spec.zone_names
    zone_index = {z: i for i, z in enumerate(zones)}
    surplus_cap = spec.replication - spec.scattering

    vertices: list[VertexId] = [SOURCE, SINK]
    vertices.extend(spread_vertex(p) for p in range(p_count))
    vertices.extend(surplus_vertex(p) for p in range(p_count))
    for p in range(p_count):
        vertices.extend(zone_slot_vertex(p, z) for z in range(len(zones)))
    vertices.extend(node_vertex(n) for n in range(len(spec.nodes)))

    net = FlowNetwork(vertices, node_ids=tuple(n.id for n in spec.nodes))
    nodes_by_zone: list[list[int]] = [[] for _ in zones]
    for i, n in enumerate(spec.nodes):
        nodes_by_zone[zone_index[n.zone]].append(i)

    for p in range(p_count):
        net.add_arc(SOURCE, spread_vertex(p), spec.scattering)
        net.add_arc(SOURCE, surplus_vertex(p), surplus_cap)
    for p in range(p_count):
        for z in range(len(zones)):
            slot = zone_slot_vertex(p, z)
            net.add_arc(spread_vertex(p), slot, 1)
            net.add_arc(surplus_vertex(p), slot, surplus_cap)
            for n in nodes_by_zone[z]:
                net.add_arc(slot, node_vertex(n), 1)
    for i, n in enumerate(spec.nodes):
        net.add_arc(node_vertex(i), SINK, n.capacity // s)
    return net


def _required_flow(net: FlowNetwork) -> int:
    s = net._source
    return sum(net._cap[a] for a in range(net.arc_count) if net._src[a] == s)


def compute_partition_size(spec: ClusterSpec, rng_seed: int = 0) -> int:
    """Largest partition size whose feasibility network still saturates.

    Dichotomy between 1 (checked up front) and 1 + total//replication, which
    is always infeasible since even perfectly packed nodes would fall short.
    """
    spec.check_feasible_shape()
    rng = random.Random(rng_seed)
    target = spec.replication * spec.partition_count

    def feasible(s: int) -> bool:
        net = max_flow(build_graph(spec, s), rng.getrandbits(64))
        return flow_value(net) == target

    if not feasible(1):
        raise InfeasibleError("no assignment exists even at partition size 1")
    lo = 1
    hi = 1 + spec.total_capacity // spec.replication
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _previous_pairs(graph: FlowNetwork, previous: Assignment) -> set[tuple[int, int]]:
    """(partition, node-index) pairs of `previous`, dropping unknown node ids."""
    if graph.node_ids is None:
        raise ValueError("graph carries no node labels; build it with build_graph")
    node_index = {node_id: i for i, node_id in enumerate(graph.node_ids)}
    pairs = set()
    for p, replica_set in enumerate(previous.replicas):
        for node_id in replica_set:
            i = node_index.get(node_id)
            if i is not None:
                pairs.add((p, i))
    return pairs


def restrict_graph(graph: FlowNetwork, previous: Assignment) -> FlowNetwork:
    """Drop every placement arc whose (partition, node) pair is not in
    `previous`; a maximal flow on the result uses only kept associations."""
    pairs = _previous_pairs(graph, previous)
    restricted = FlowNetwork(graph.vertices, node_ids=graph.node_ids)
    verts = graph.vertices
    for a in range(graph.arc_count):
        u = verts[graph._src[a]]
        v = verts[graph._dst[a]]
        if u.kind == ZONE_SLOT_KIND and v.kind == NODE_KIND:
            if (u.part, v.node) not in pairs:
                continue
        restricted.add_arc(u, v, graph._cap[a])
    return restricted


def compute_candidate_assignment(
    graph: FlowNetwork,
    previous: Assignment | None,
    rng_seed: int = 0,
) -> tuple[FlowNetwork, int | None]:
    """Maximal flow on `graph`, nudged toward the previous assignment.

    With a previous assignment the flow is first maximized on the restricted
    graph, transplanted, then completed on the full graph; the warm start
    tends to keep the restricted associations. Returns the flow and the
    restricted flow value (None without a previous assignment).
    """
    rng = random.Random(rng_seed)
    seed_restricted = rng.getrandbits(64)
    seed_full = rng.getrandbits(64)
    required = _required_flow(graph)

    restricted_value = None
    if previous is None:
        result = max_flow(graph, seed_full)
    else:
        partial = max_flow(restrict_graph(graph, previous), seed_restricted)
        restricted_value = flow_value(partial)
        warm = graph.copy()
        for a in range(partial.arc_count):
            f = partial._flow[a]
            if f:
                warm._flow[warm._pair[(partial._src[a], partial._dst[a])]] = f
        result = max_flow(warm, seed_full)

    achieved = flow_value(result)
    if achieved != required:
        raise RuntimeError(
            f"candidate flow reached {achieved} of {required};"
            " the certified partition size should have been feasible"
        )
    return result, restricted_value


def reference_pattern(graph: FlowNetwork, previous: Assignment) -> FlowNetwork:
    """Saturation pattern of `previous` on the placement arcs of `graph`.

    Only those arcs matter for residual weights, so the pattern skips the
    connector arcs entirely; it is a weight reference, not a valid flow.
    """
    pairs = _previous_pairs(graph, previous)
    pattern = graph.copy()
    verts = graph.vertices
    for a in range(pattern.arc_count):
        u = verts[pattern._src[a]]
        v = verts[pattern._dst[a]]
        if u.kind == ZONE_SLOT_KIND and v.kind == NODE_KIND:
            pattern._flow[a] = 1 if (u.part, v.node) in pairs else 0
        else:
            pattern._flow[a] = 0
    return pattern


def minimize_transfer_load(
    graph: FlowNetwork,
    previous: Assignment,
    budget_ms: int | None = None,
    rng_seed: int = 0,
) -> tuple[FlowNetwork, bool]:
    """Cancel negative residual cycles until the flow is as close as possible
    to the previous assignment, or until the budget runs out.

    Returns (flow, converged). On natural termination no negative cycle
    remains, which certifies the distance is minimal among maximal flows.
    The flow value never changes, so the result stays size-optimal either
    way. `rng_seed` is accepted for interface symmetry; detection and
    application are deterministic.
    """
    del rng_seed
    net = graph.copy()
    reference = reference_pattern(graph, previous)
    node_count = sum(1 for v in graph.vertices if v.kind == NODE_KIND)
    bound = 4 * node_count + 1
    deadline = None if budget_ms is None else time.monotonic() + budget_ms / 1000.0

    # Each round strictly decreases the distance, which starts at most at
    # twice the replica count, so this loop cannot run longer than that.
    for _ in range(2 * _required_flow(graph) + 1):
        if deadline is not None and time.monotonic() >= deadline:
            return net, False
        cycles = detect_negative_cycles(residual_cost_graph(net, reference), bound)
        if not cycles:
            return net, True
        for cycle in cycles:
            apply_cycle_inplace(net, cycle)
    raise RuntimeError("cycle canceling failed to terminate; distance did not decrease")


def assignment_from_flow(graph: FlowNetwork, spec: ClusterSpec, s: int) -> Assignment:
    """Read the replica map off a saturating flow; replica lists are sorted
    by node id for reproducibility."""
    required = spec.replication * spec.partition_count
    achieved = flow_value(graph)
    if achieved != required:
        raise ValueError(
            f"flow value {achieved} does not realize an assignment (need {required})"
        )
    verts = graph.vertices
    replicas: list[list[str]] = [[] for _ in range(spec.partition_count)]
    for a in range(graph.arc_count):
        if graph._flow[a]:
            u = verts[graph._src[a]]
            v = verts[graph._dst[a]]
            if u.kind == ZONE_SLOT_KIND and v.kind == NODE_KIND:
                replicas[u.part].append(spec.nodes[v.node].id)
    return Assignment(
        partition_size=s,
        replicas=tuple(tuple(sorted(r)) for r in replicas),
    )


def distance(a: Assignment, b: Assignment) -> int:
    """Number of (node, partition) pairs present in exactly one assignment.

    This is the transfer-load measure: each unit is one replica copy that
    appears or disappears. Replica-list order is ignored.
    """
    if a.partition_count != b.partition_count:
        raise ValueError(
            f"partition count mismatch: {a.partition_count} vs {b.partition_count}"
        )
    total = 0
    for ra, rb in zip(a.replicas, b.replicas):
        total += len(set(ra) ^ set(rb))
    return total


def transfer_count(new: Assignment, previous: Assignment) -> int:
    """Number of (partition, node) pairs newly added: the inbound copies."""
    total = 0
    for rn, rp in zip(new.replicas, previous.replicas):
        total += len(set(rn) - set(rp))
    return total


def compute_metrics(
    spec: ClusterSpec,
    optimal_size: int,
    final_flow: FlowNetwork,
    previous: Assignment | None = None,
    candidate_restricted_value: int | None = None,
    transfer_min_converged: bool | None = None,
) -> LayoutMetrics:
    """Metrics for a saturating flow at the given partition size."""
    assignment = assignment_from_flow(final_flow, spec, optimal_size)
    counts: dict[str, int] = {n.id: 0 for n in spec.nodes}
    for replica_set in assignment.replicas:
        for node_id in replica_set:
            counts[node_id] += 1

    node_use: dict[str, NodeUse] = {}
    zone_parts: dict[str, int] = {z: 0 for z in spec.zone_names}
    zone_slots: dict[str, int] = {z: 0 for z in spec.zone_names}
    for n in spec.nodes:
        held = counts[n.id]
        slots = n.capacity // optimal_size
        # A node with no slots is trivially at its full (zero) potential.
        ratio = held / slots if slots else 1.0
        node_use[n.id] = NodeUse(held, slots, n.capacity, held * optimal_size, ratio)
        zone_parts[n.zone] += held
        zone_slots[n.zone] += slots
    zone_use = {
        z: ZoneUse(
            zone_parts[z],
            zone_slots[z],
            zone_parts[z] / zone_slots[z] if zone_slots[z] else 1.0,
        )
        for z in spec.zone_names
    }

    total = spec.total_capacity
    stored = optimal_size * spec.replication * spec.partition_count
    unusable = max(0.0, round(100.0 * (1.0 - stored / total), 4)) if total else 0.0

    dist = trans = None
    if previous is not None:
        dist = distance(assignment, previous)
        trans = transfer_count(assignment, previous)

    return LayoutMetrics(
        optimal_size=optimal_size,
        ideal_size=total // spec.replication,
        total_capacity=total,
        unusable_capacity_pct=unusable,
        node_utilization=node_use,
        zone_utilization=zone_use,
        saturated_nodes=tuple(
            n.id for n in spec.nodes if node_use[n.id].partitions == node_use[n.id].slots
        ),
        saturated_zones=tuple(
            z for z in spec.zone_names if zone_parts[z] == zone_slots[z]
        ),
        distance_to_previous=dist,
        partition_transfers=trans,
        candidate_flow_restricted=candidate_restricted_value,
        transfer_min_converged=transfer_min_converged,
    )


def compute_layout(
    spec: ClusterSpec,
    previous: Assignment | None = None,
    rng_seed: int = 0,
    budget_ms: int | None = None,
) -> tuple[Assignment, LayoutMetrics]:
    """Full pipeline: partition size, candidate flow, transfer minimization,
    assignment extraction, metrics. Deterministic for fixed inputs."""
    if previous is not None and previous.partition_count != spec.partition_count:
        raise PreviousLayoutError(
            f"previous assignment covers {previous.partition_count} partitions,"
            f" spec expects {spec.partition_count};"
            " changing partition bits is not supported"
        )
    rng = random.Random(rng_seed)
    seed_size = rng.getrandbits(64)
    seed_candidate = rng.getrandbits(64)
    seed_minimize = rng.getrandbits(64)

    optimal = compute_partition_size(spec, seed_size)
    graph = build_graph(spec, optimal)
    flow, restricted_value = compute_candidate_assignment(graph, previous, seed_candidate)
    converged = None
    if previous is not None:
        flow, converged = minimize_transfer_load(flow, previous, budget_ms, seed_minimize)
    assignment = assignment_from_flow(flow, spec, optimal)
    metrics = compute_metrics(spec, optimal, flow, previous, restricted_value, converged)
    return assignment, metrics
