"""Integer max-flow machinery.

Flow networks over tagged vertices, Dinic's algorithm with seeded random
neighbor order (and warm starts), weighted residual graphs relative to a
reference placement, and bounded Bellman-Ford negative-cycle detection.

Everything here is pure integer arithmetic; returned values are treated as
frozen by convention and are safe to hand between threads.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

SOURCE_KIND = "source"
SINK_KIND = "sink"
# Per-partition head that forces replicas onto distinct zones.
SPREAD_KIND = "spread"
# Per-partition head that routes the replicas beyond the zone minimum.
SURPLUS_KIND = "surplus"
# One slot per (partition, zone); unit arcs out of it keep nodes distinct.
ZONE_SLOT_KIND = "zone_slot"
NODE_KIND = "node"


@dataclass(frozen=True)
class VertexId:
    """Tagged vertex label. Index fields are dense and default to -1 when
    the tag does not use them."""

    kind: str
    part: int = -1
    zone: int = -1
    node: int = -1


SOURCE = VertexId(SOURCE_KIND)
SINK = VertexId(SINK_KIND)


def spread_vertex(part: int) -> VertexId:
    return VertexId(SPREAD_KIND, part=part)


def surplus_vertex(part: int) -> VertexId:
    return VertexId(SURPLUS_KIND, part=part)


def zone_slot_vertex(part: int, zone: int) -> VertexId:
    return VertexId(ZONE_SLOT_KIND, part=part, zone=zone)


def node_vertex(node: int) -> VertexId:
    return VertexId(NODE_KIND, node=node)


class Arc(NamedTuple):
    src: VertexId
    dst: VertexId
    capacity: int
    flow: int


class FlowNetwork:
    """Directed network with integer capacities and an explicit flow.

    Zero-capacity arcs are never stored (they can carry nothing and only slow
    traversal down), and at most one arc may exist per ordered vertex pair.
    Networks must contain exactly one source and one sink vertex.
    """

    __slots__ = (
        "vertices",
        "node_ids",
        "_index",
        "_src",
        "_dst",
        "_cap",
        "_flow",
        "_adj",
        "_pair",
        "_source",
        "_sink",
    )

    def __init__(
        self,
        vertices: Iterable[VertexId],
        node_ids: tuple[str, ...] | None = None,
    ):
        self.vertices: list[VertexId] = list(vertices)
        self._index: dict[VertexId, int] = {}
        for i, v in enumerate(self.vertices):
            if v in self._index:
                raise ValueError(f"duplicate vertex {v}")
            self._index[v] = i
        if SOURCE not in self._index:
            raise ValueError("network has no source vertex")
        if SINK not in self._index:
            raise ValueError("network has no sink vertex")
        self._source = self._index[SOURCE]
        self._sink = self._index[SINK]
        # Optional external labels for node vertices, aligned to node index.
        self.node_ids = node_ids
        self._src: list[int] = []
        self._dst: list[int] = []
        self._cap: list[int] = []
        self._flow: list[int] = []
        # Adjacency entries encode 2*arc_index + direction (0 forward, 1 reverse).
        self._adj: list[list[int]] = [[] for _ in self.vertices]
        self._pair: dict[tuple[int, int], int] = {}

    def add_arc(self, src: VertexId, dst: VertexId, capacity: int) -> None:
        """Add an arc with the given capacity; zero-capacity arcs are omitted."""
        if capacity < 0:
            raise ValueError(f"negative capacity {capacity} on ({src}, {dst})")
        if capacity == 0:
            return
        u = self._index[src]
        v = self._index[dst]
        if u == v:
            raise ValueError(f"self-loop on {src}")
        if (u, v) in self._pair:
            raise ValueError(f"duplicate arc ({src}, {dst})")
        a = len(self._src)
        self._src.append(u)
        self._dst.append(v)
        self._cap.append(capacity)
        self._flow.append(0)
        self._adj[u].append(2 * a)
        self._adj[v].append(2 * a + 1)
        self._pair[(u, v)] = a

    @property
    def arc_count(self) -> int:
        return len(self._src)

    def arcs(self) -> Iterator[Arc]:
        verts = self.vertices
        for a in range(len(self._src)):
            yield Arc(verts[self._src[a]], verts[self._dst[a]], self._cap[a], self._flow[a])

    def arc_flow(self, src: VertexId, dst: VertexId) -> int:
        """Flow on the arc (src, dst); 0 if the arc is absent."""
        a = self._pair.get((self._index[src], self._index[dst]))
        return 0 if a is None else self._flow[a]

    def copy(self) -> "FlowNetwork":
        dup = FlowNetwork.__new__(FlowNetwork)
        dup.vertices = self.vertices
        dup._index = self._index
        dup._source = self._source
        dup._sink = self._sink
        dup.node_ids = self.node_ids
        dup._src = self._src[:]
        dup._dst = self._dst[:]
        dup._cap = self._cap[:]
        dup._flow = self._flow[:]
        dup._adj = [entries[:] for entries in self._adj]
        dup._pair = dict(self._pair)
        return dup

    def validate(self) -> list[str]:
        """Check capacity bounds and flow conservation; return violations."""
        problems = []
        balance = [0] * len(self.vertices)
        for a in range(len(self._src)):
            f = self._flow[a]
            if not 0 <= f <= self._cap[a]:
                problems.append(
                    f"arc {self.vertices[self._src[a]]} -> {self.vertices[self._dst[a]]}:"
                    f" flow {f} outside [0, {self._cap[a]}]"
                )
            balance[self._src[a]] += f
            balance[self._dst[a]] -= f
        for i, b in enumerate(balance):
            if b != 0 and i not in (self._source, self._sink):
                problems.append(f"conservation violated at {self.vertices[i]} (net outflow {b})")
        return problems


def flow_value(network: FlowNetwork) -> int:
    """Total outflow of the source (equals total inflow of the sink)."""
    s = network._source
    total = 0
    for a in range(len(network._src)):
        if network._src[a] == s:
            total += network._flow[a]
        elif network._dst[a] == s:
            total -= network._flow[a]
    return total


def max_flow(network: FlowNetwork, rng_seed: int) -> FlowNetwork:
    """Return a copy of `network` whose flow is maximal.

    Dinic's algorithm. Any flow already present is kept and extended, so a
    warm start never loses value. Each vertex's neighbor order is shuffled
    once per phase with a generator seeded by `rng_seed`, which spreads the
    chosen arcs while keeping the result a pure function of the inputs.
    """
    result = network.copy()
    _dinic_inplace(result, random.Random(rng_seed))
    return result


def _dinic_inplace(net: FlowNetwork, rng: random.Random) -> None:
    adj = net._adj
    asrc = net._src
    adst = net._dst
    acap = net._cap
    aflow = net._flow
    s = net._source
    t = net._sink
    nv = len(adj)
    shuffle = rng.shuffle

    while True:
        for entries in adj:
            if len(entries) > 1:
                shuffle(entries)

        # BFS level graph over residual arcs.
        level = [-1] * nv
        level[s] = 0
        queue = deque((s,))
        while queue:
            u = queue.popleft()
            nxt_level = level[u] + 1
            for e in adj[u]:
                a = e >> 1
                if e & 1:
                    if aflow[a] <= 0:
                        continue
                    v = asrc[a]
                else:
                    if acap[a] - aflow[a] <= 0:
                        continue
                    v = adst[a]
                if level[v] < 0:
                    level[v] = nxt_level
                    queue.append(v)
        if level[t] < 0:
            return

        # Blocking flow with per-vertex current-arc pointers.
        pointer = [0] * nv
        path: list[int] = []
        u = s
        while True:
            if u == t:
                delta = None
                for e in path:
                    a = e >> 1
                    r = aflow[a] if e & 1 else acap[a] - aflow[a]
                    if delta is None or r < delta:
                        delta = r
                cut = -1
                for i, e in enumerate(path):
                    a = e >> 1
                    if e & 1:
                        aflow[a] -= delta
                        left = aflow[a]
                    else:
                        aflow[a] += delta
                        left = acap[a] - aflow[a]
                    if left == 0 and cut < 0:
                        cut = i
                # Resume from the tail of the first saturated arc.
                e = path[cut]
                a = e >> 1
                u = adst[a] if e & 1 else asrc[a]
                del path[cut:]
                continue

            entries = adj[u]
            i = pointer[u]
            n_entries = len(entries)
            nxt = -1
            want = level[u] + 1
            while i < n_entries:
                e = entries[i]
                a = e >> 1
                if e & 1:
                    if aflow[a] > 0:
                        v = asrc[a]
                        if level[v] == want:
                            nxt = v
                            break
                else:
                    if acap[a] - aflow[a] > 0:
                        v = adst[a]
                        if level[v] == want:
                            nxt = v
                            break
                i += 1
            pointer[u] = i
            if nxt >= 0:
                path.append(entries[i])
                u = nxt
            else:
                level[u] = -1  # dead end for this phase
                if u == s:
                    break
                e = path.pop()
                a = e >> 1
                u = adst[a] if e & 1 else asrc[a]
                pointer[u] += 1


class CostArc(NamedTuple):
    """One residual direction of a network arc, weighted for cycle canceling.

    `src`/`dst` are dense vertex indices, `arc` the underlying network arc,
    `reverse` whether this direction undoes flow on it.
    """

    src: int
    dst: int
    weight: int
    arc: int
    reverse: bool


@dataclass(frozen=True)
class CostGraph:
    """Residual graph of a flow, with placement arcs weighted +/-1 against a
    reference and every other arc weighted 0."""

    vertices: list[VertexId]
    arcs: tuple[CostArc, ...]


@dataclass(frozen=True)
class Cycle:
    """Simple cycle of residual arcs; consecutive arcs share endpoints and the
    last arc closes back on the first."""

    arcs: tuple[CostArc, ...]
    weight: int


def _is_placement_arc(u: VertexId, v: VertexId) -> bool:
    return (u.kind == ZONE_SLOT_KIND and v.kind == NODE_KIND) or (
        u.kind == NODE_KIND and v.kind == ZONE_SLOT_KIND
    )


def residual_cost_graph(network: FlowNetwork, reference: FlowNetwork) -> CostGraph:
    """Build the weighted residual graph of `network` relative to `reference`.

    Both residual directions of a placement arc carry the same weight: +1 when
    the arc is saturated in both flows or in neither (pushing a unit would move
    them apart), -1 when it is saturated in exactly one (pushing brings them
    together). Only the placement-arc saturation of `reference` is read, so a
    bare saturation pattern works as a reference.
    """
    if network.vertices != reference.vertices or not (
        network._src == reference._src
        and network._dst == reference._dst
        and network._cap == reference._cap
    ):
        raise ValueError("incompatible flows: networks differ in topology")

    verts = network.vertices
    asrc = network._src
    adst = network._dst
    acap = network._cap
    aflow = network._flow
    rflow = reference._flow
    arcs: list[CostArc] = []
    for a in range(len(asrc)):
        u = asrc[a]
        v = adst[a]
        cap = acap[a]
        f = aflow[a]
        if _is_placement_arc(verts[u], verts[v]):
            w = 1 if (f == cap) == (rflow[a] == cap) else -1
        else:
            w = 0
        if cap - f >= 1:
            arcs.append(CostArc(u, v, w, a, False))
        if f >= 1:
            arcs.append(CostArc(v, u, w, a, True))
    return CostGraph(verts, tuple(arcs))


def detect_negative_cycles(cost_graph: CostGraph, iteration_bound: int) -> list[Cycle]:
    """Find vertex-disjoint negative cycles, or return [] when none exist.

    Bellman-Ford from a virtual super-source: every label starts at 0, and
    rounds are synchronized so that after k rounds each label is the cheapest
    walk of at most k arcs. The loop stops as soon as the labels stabilize
    (then no negative cycle exists, provided `iteration_bound` exceeds the
    longest simple path) or as soon as cycles appear in the predecessor graph.
    Strict relaxations only ever close negative-weight predecessor cycles, and
    the predecessor graph is functional, so the cycles found are negative and
    vertex-disjoint by construction.
    """
    if iteration_bound < 1:
        raise ValueError("iteration_bound must be >= 1")
    nv = len(cost_graph.vertices)
    arcs = cost_graph.arcs
    out: list[list[int]] = [[] for _ in range(nv)]
    for idx, ca in enumerate(arcs):
        out[ca.src].append(idx)

    dist = [0] * nv
    pred = [-1] * nv
    frontier: Iterable[int] = range(nv)
    # Labels on a negative cycle keep improving, so its predecessor cycle
    # materializes within a few rounds of the bound; the slack below is a
    # safety margin, not extra search depth.
    hard_cap = iteration_bound + nv
    for round_no in range(hard_cap):
        updates: dict[int, tuple[int, int]] = {}
        for u in frontier:
            du = dist[u]
            for ai in out[u]:
                ca = arcs[ai]
                nd = du + ca.weight
                v = ca.dst
                if nd < dist[v]:
                    cur = updates.get(v)
                    if cur is None or nd < cur[0]:
                        updates[v] = (nd, ai)
        if not updates:
            return []
        for v, (nd, ai) in updates.items():
            dist[v] = nd
            pred[v] = ai
        improved = sorted(updates)
        cycles = _predecessor_cycles(improved, pred, arcs, nv)
        if cycles:
            return cycles
        frontier = improved
    raise RuntimeError("negative cycle present but no predecessor cycle formed")


def _predecessor_cycles(
    candidates: list[int], pred: list[int], arcs: tuple[CostArc, ...], nv: int
) -> list[Cycle]:
    # 0 = unvisited, 1 = on the current walk, 2 = finished.
    state = [0] * nv
    cycles: list[Cycle] = []
    for start in candidates:
        if state[start]:
            continue
        walk: list[int] = []
        v = start
        while v >= 0 and state[v] == 0:
            state[v] = 1
            walk.append(v)
            ai = pred[v]
            v = arcs[ai].src if ai >= 0 else -1
        if v >= 0 and state[v] == 1:
            pos = walk.index(v)
            members = walk[pos:]
            # pred[w] enters w, so reversing the chain gives forward order.
            cycle_arcs = [arcs[pred[w]] for w in members]
            cycle_arcs.reverse()
            weight = sum(ca.weight for ca in cycle_arcs)
            if weight < 0:
                cycles.append(Cycle(tuple(_rotate_min(cycle_arcs)), weight))
        for w in walk:
            state[w] = 2
    return cycles


def _rotate_min(cycle_arcs: list[CostArc]) -> list[CostArc]:
    k = min(range(len(cycle_arcs)), key=lambda i: cycle_arcs[i].src)
    return cycle_arcs[k:] + cycle_arcs[:k]


def apply_cycle(network: FlowNetwork, cycle: Cycle) -> FlowNetwork:
    """Push one unit of flow around `cycle` and return the adjusted network.

    Forward residual arcs gain a unit, reverse ones lose a unit, so the flow
    value is unchanged and conservation is preserved at every vertex.
    """
    result = network.copy()
    apply_cycle_inplace(result, cycle)
    return result


def apply_cycle_inplace(net: FlowNetwork, cycle: Cycle) -> None:
    cap = net._cap
    flow = net._flow
    for ca in cycle.arcs:
        a = ca.arc
        if not (0 <= a < len(cap)) or net._src[a] != (ca.dst if ca.reverse else ca.src):
            raise ValueError("stale cycle: arc does not belong to this network")
        residual = flow[a] if ca.reverse else cap[a] - flow[a]
        if residual < 1:
            raise ValueError("stale cycle: arc has no residual capacity")
    for ca in cycle.arcs:
        flow[ca.arc] += -1 if ca.reverse else 1
