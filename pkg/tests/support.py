"""Shared helpers for the test suite.

The max-flow and negative-cycle checkers here are deliberately independent of
the package's own algorithms so they can serve as oracles.
"""

from __future__ import annotations

import random
from collections import deque

from partplan import (
    Assignment,
    ClusterSpec,
    CostGraph,
    FlowNetwork,
    NodeSpec,
)
from partplan.flowgraph import NODE_KIND, ZONE_SLOT_KIND


def random_spec(
    rng: random.Random,
    *,
    n_range=(3, 5),
    z_max=3,
    p_choices=(2, 4, 8),
    rho_max=3,
    cap_range=(0, 200),
) -> ClusterSpec:
    n = rng.randint(*n_range)
    zone_count = rng.randint(1, min(z_max, n))
    nodes = tuple(
        NodeSpec(f"n{i:02d}", f"z{rng.randint(0, zone_count - 1)}", rng.randint(*cap_range))
        for i in range(n)
    )
    replication = rng.randint(1, rho_max)
    scattering = rng.randint(1, replication)
    bits = {2: 1, 4: 2, 8: 3, 16: 4, 256: 8}[rng.choice(list(p_choices))]
    return ClusterSpec(nodes, replication, scattering, bits)


def mutate_spec(rng: random.Random, spec: ClusterSpec) -> ClusterSpec:
    """One node-level change: capacity, zone, removal, or addition."""
    nodes = list(spec.nodes)
    moves = ["capacity", "zone", "add"]
    if len(nodes) > 1:
        moves.append("remove")
    move = rng.choice(moves)
    if move == "capacity":
        i = rng.randrange(len(nodes))
        nodes[i] = NodeSpec(nodes[i].id, nodes[i].zone, rng.randint(0, 200))
    elif move == "zone":
        i = rng.randrange(len(nodes))
        nodes[i] = NodeSpec(nodes[i].id, f"z{rng.randint(0, 2)}", nodes[i].capacity)
    elif move == "remove":
        nodes.pop(rng.randrange(len(nodes)))
    else:
        nodes.append(NodeSpec(f"m{rng.randint(0, 999):03d}", f"z{rng.randint(0, 2)}",
                              rng.randint(0, 200)))
    return ClusterSpec(tuple(nodes), spec.replication, spec.scattering, spec.partition_bits)


def scipy_max_flow_value(network: FlowNetwork) -> int:
    """Independent max-flow value via scipy's solver."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import maximum_flow

    n = len(network.vertices)
    rows, cols, caps = [], [], []
    index = {v: i for i, v in enumerate(network.vertices)}
    for arc in network.arcs():
        rows.append(index[arc.src])
        cols.append(index[arc.dst])
        caps.append(arc.capacity)
    if not caps:
        return 0
    matrix = csr_matrix((caps, (rows, cols)), shape=(n, n), dtype="int32")
    return int(maximum_flow(matrix, network._source, network._sink).flow_value)


def has_augmenting_path(network: FlowNetwork) -> bool:
    """BFS over residual arcs from source to sink."""
    n = len(network.vertices)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for a in range(network.arc_count):
        u, v = network._src[a], network._dst[a]
        if network._cap[a] - network._flow[a] > 0:
            adj[u].append((v, a))
        if network._flow[a] > 0:
            adj[v].append((u, a))
    seen = [False] * n
    seen[network._source] = True
    queue = deque((network._source,))
    while queue:
        u = queue.popleft()
        if u == network._sink:
            return True
        for v, _ in adj[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return False


def placement_distance(network: FlowNetwork, reference: FlowNetwork) -> int:
    """Flow-level distance: placement arcs saturated in exactly one flow."""
    total = 0
    verts = network.vertices
    for a in range(network.arc_count):
        u, v = verts[network._src[a]], verts[network._dst[a]]
        if u.kind == ZONE_SLOT_KIND and v.kind == NODE_KIND:
            if (network._flow[a] == network._cap[a]) != (
                reference._flow[a] == reference._cap[a]
            ):
                total += 1
    return total


def textbook_negative_cycle_exists(cost_graph: CostGraph, rounds: int) -> bool:
    """Classic Bellman-Ford: relax every arc for `rounds` rounds from a
    virtual super-source (all labels 0) and report whether the final round
    still improved anything."""
    dist = [0] * len(cost_graph.vertices)
    improved = False
    for _ in range(rounds):
        improved = False
        for arc in cost_graph.arcs:
            nd = dist[arc.src] + arc.weight
            if nd < dist[arc.dst]:
                dist[arc.dst] = nd
                improved = True
        if not improved:
            return False
    return improved


def random_reference(rng: random.Random, spec: ClusterSpec) -> Assignment:
    """Arbitrary replica pattern over the spec's nodes, not necessarily valid."""
    ids = [n.id for n in spec.nodes]
    replicas = []
    for _ in range(spec.partition_count):
        k = rng.randint(0, min(len(ids), spec.replication))
        replicas.append(tuple(sorted(rng.sample(ids, k))))
    return Assignment(partition_size=1, replicas=tuple(replicas))
