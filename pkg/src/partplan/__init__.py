"""Zone-aware partition placement for replicated storage clusters."""

from .errors import (
    INFEASIBLE_DIAGNOSTIC,
    InfeasibleError,
    OracleGuardError,
    PartPlanError,
    PreviousLayoutError,
    SpecError,
)
from .flowgraph import (
    SINK,
    SOURCE,
    CostArc,
    CostGraph,
    Cycle,
    FlowNetwork,
    VertexId,
    apply_cycle,
    detect_negative_cycles,
    flow_value,
    max_flow,
    node_vertex,
    residual_cost_graph,
    spread_vertex,
    surplus_vertex,
    zone_slot_vertex,
)
from .layout import (
    Assignment,
    ClusterSpec,
    LayoutMetrics,
    NodeSpec,
    NodeUse,
    ZoneUse,
    assignment_from_flow,
    build_graph,
    compute_candidate_assignment,
    compute_layout,
    compute_metrics,
    compute_partition_size,
    distance,
    minimize_transfer_load,
    partition_of_hash,
    reference_pattern,
    restrict_graph,
    transfer_count,
)
from .oracle import OracleResult, brute_force_min_distance, brute_force_optimal_size

__all__ = [
    "INFEASIBLE_DIAGNOSTIC",
    "Assignment",
    "ClusterSpec",
    "CostArc",
    "CostGraph",
    "Cycle",
    "FlowNetwork",
    "InfeasibleError",
    "LayoutMetrics",
    "NodeSpec",
    "NodeUse",
    "OracleGuardError",
    "OracleResult",
    "PartPlanError",
    "PreviousLayoutError",
    "SINK",
    "SOURCE",
    "SpecError",
    "VertexId",
    "ZoneUse",
    "apply_cycle",
    "assignment_from_flow",
    "brute_force_min_distance",
    "brute_force_optimal_size",
    "build_graph",
    "compute_candidate_assignment",
    "compute_layout",
    "compute_metrics",
    "compute_partition_size",
    "detect_negative_cycles",
    "distance",
    "flow_value",
    "max_flow",
    "minimize_transfer_load",
    "node_vertex",
    "partition_of_hash",
    "reference_pattern",
    "restrict_graph",
    "spread_vertex",
    "surplus_vertex",
    "transfer_count",
    "zone_slot_vertex",
]
