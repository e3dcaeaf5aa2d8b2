"""Command-line front end.

Reads cluster specs and previous layouts from JSON files, runs the optimizer,
writes the new layout, and reports metrics. Exit codes: 0 success, 1 I/O or
parse error, 2 infeasible, 3 validation failure, 4 oracle guard.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Any

from .errors import (
    InfeasibleError,
    OracleGuardError,
    PreviousLayoutError,
    SpecError,
)
from .layout import (
    Assignment,
    ClusterSpec,
    LayoutMetrics,
    NodeSpec,
    compute_layout,
)
from .oracle import brute_force_min_distance, brute_force_optimal_size

EXIT_OK = 0
EXIT_IO = 1
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3
EXIT_ORACLE_GUARD = 4

_SPEC_KEYS = {"nodes", "replication", "scattering", "partition_bits"}
_NODE_KEYS = {"id", "zone", "capacity"}
_LAYOUT_KEYS = {"version", "partition_bits", "partition_size", "assignment", "metrics"}
_METRICS_KEYS = {
    "optimal_size",
    "ideal_size",
    "total_capacity",
    "unusable_capacity_pct",
    "node_utilization",
    "zone_utilization",
    "saturated_nodes",
    "saturated_zones",
    "distance_to_previous",
    "partition_transfers",
    "candidate_flow_restricted",
    "transfer_min_converged",
}


@dataclass(frozen=True)
class LayoutFile:
    version: int
    partition_bits: int
    partition_size: int
    assignment: tuple[tuple[str, ...], ...]
    metrics: dict[str, Any]

    def to_assignment(self) -> Assignment:
        return Assignment(partition_size=self.partition_size, replicas=self.assignment)


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"


def _require_int(doc: Any, key: str, where: str, minimum: int | None = None) -> int:
    value = doc.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(f"{where}: field {key!r} must be an integer")
    if minimum is not None and value < minimum:
        raise SpecError(f"{where}: field {key!r} must be >= {minimum}")
    return value


def _reject_unknown(doc: dict, allowed: set[str], where: str) -> None:
    for key in doc:
        if key not in allowed:
            raise SpecError(f"{where}: unknown key {key!r}")


def parse_spec(doc: Any) -> ClusterSpec:
    if not isinstance(doc, dict):
        raise SpecError("spec: top level must be a JSON object")
    _reject_unknown(doc, _SPEC_KEYS, "spec")
    for key in _SPEC_KEYS:
        if key not in doc:
            raise SpecError(f"spec: missing key {key!r}")
    if not isinstance(doc["nodes"], list):
        raise SpecError("spec: field 'nodes' must be an array")
    nodes = []
    for i, entry in enumerate(doc["nodes"]):
        where = f"spec: nodes[{i}]"
        if not isinstance(entry, dict):
            raise SpecError(f"{where} must be an object")
        _reject_unknown(entry, _NODE_KEYS, where)
        for key in _NODE_KEYS:
            if key not in entry:
                raise SpecError(f"{where}: missing key {key!r}")
        if not isinstance(entry["id"], str) or not isinstance(entry["zone"], str):
            raise SpecError(f"{where}: 'id' and 'zone' must be strings")
        capacity = _require_int(entry, "capacity", where, minimum=0)
        nodes.append(NodeSpec(entry["id"], entry["zone"], capacity))
    try:
        return ClusterSpec(
            nodes=tuple(nodes),
            replication=_require_int(doc, "replication", "spec", minimum=1),
            scattering=_require_int(doc, "scattering", "spec", minimum=1),
            partition_bits=_require_int(doc, "partition_bits", "spec", minimum=1),
        )
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(f"spec: {exc}") from exc


def parse_layout(doc: Any) -> LayoutFile:
    if not isinstance(doc, dict):
        raise SpecError("layout: top level must be a JSON object")
    _reject_unknown(doc, _LAYOUT_KEYS, "layout")
    for key in _LAYOUT_KEYS:
        if key not in doc:
            raise SpecError(f"layout: missing key {key!r}")
    version = _require_int(doc, "version", "layout", minimum=1)
    bits = _require_int(doc, "partition_bits", "layout", minimum=1)
    size = _require_int(doc, "partition_size", "layout", minimum=1)
    assignment = doc["assignment"]
    if not isinstance(assignment, list) or len(assignment) != (1 << bits):
        raise SpecError(
            f"layout: 'assignment' must be an array of {1 << bits} partitions"
        )
    replicas = []
    for p, entry in enumerate(assignment):
        if not isinstance(entry, list) or not all(isinstance(x, str) for x in entry):
            raise SpecError(f"layout: assignment[{p}] must be an array of node ids")
        replicas.append(tuple(entry))
    metrics = doc["metrics"]
    if not isinstance(metrics, dict):
        raise SpecError("layout: 'metrics' must be an object")
    _reject_unknown(metrics, _METRICS_KEYS, "layout: metrics")
    return LayoutFile(version, bits, size, tuple(replicas), metrics)


def metrics_to_doc(metrics: LayoutMetrics) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "optimal_size": metrics.optimal_size,
        "ideal_size": metrics.ideal_size,
        "total_capacity": metrics.total_capacity,
        "unusable_capacity_pct": metrics.unusable_capacity_pct,
        "node_utilization": {
            node_id: {
                "partitions": use.partitions,
                "slots": use.slots,
                "capacity": use.capacity,
                "stored": use.stored,
                "utilization": round(use.utilization, 4),
            }
            for node_id, use in metrics.node_utilization.items()
        },
        "zone_utilization": {
            zone: {
                "partitions": use.partitions,
                "slots": use.slots,
                "utilization": round(use.utilization, 4),
            }
            for zone, use in metrics.zone_utilization.items()
        },
        "saturated_nodes": list(metrics.saturated_nodes),
        "saturated_zones": list(metrics.saturated_zones),
    }
    if metrics.distance_to_previous is not None:
        doc["distance_to_previous"] = metrics.distance_to_previous
    if metrics.partition_transfers is not None:
        doc["partition_transfers"] = metrics.partition_transfers
    if metrics.candidate_flow_restricted is not None:
        doc["candidate_flow_restricted"] = metrics.candidate_flow_restricted
    if metrics.transfer_min_converged is not None:
        doc["transfer_min_converged"] = metrics.transfer_min_converged
    return doc


def layout_to_doc(
    version: int, spec: ClusterSpec, assignment: Assignment, metrics: LayoutMetrics
) -> dict[str, Any]:
    return {
        "version": version,
        "partition_bits": spec.partition_bits,
        "partition_size": assignment.partition_size,
        "assignment": [list(r) for r in assignment.replicas],
        "metrics": metrics_to_doc(metrics),
    }


def _read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON: {exc}") from exc


def _print_human_report(metrics: LayoutMetrics) -> None:
    m = metrics
    print(f"partition size: {m.optimal_size}")
    print(
        f"ideal effective capacity: {m.ideal_size},"
        f" unusable: {m.unusable_capacity_pct}% of {m.total_capacity}"
    )
    for node_id, use in m.node_utilization.items():
        tag = " [saturated]" if node_id in m.saturated_nodes else ""
        print(
            f"node {node_id}: {use.partitions} partitions,"
            f" {use.stored}/{use.capacity} used ({use.utilization:.2%}){tag}"
        )
    for zone, use in m.zone_utilization.items():
        tag = " [saturated]" if zone in m.saturated_zones else ""
        print(f"zone {zone}: {use.partitions}/{use.slots} slots ({use.utilization:.2%}){tag}")
    if m.distance_to_previous is not None:
        print(
            f"distance to previous: {m.distance_to_previous}"
            f" ({m.partition_transfers} replica transfers)"
        )
        if m.transfer_min_converged is False:
            print("warning: transfer minimization hit its time budget;"
                  " distance may not be minimal")


def cmd_compute(args: argparse.Namespace) -> int:
    try:
        spec = parse_spec(_read_json(args.spec))
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    previous = None
    version = 1
    if args.previous:
        try:
            layout = parse_layout(_read_json(args.previous))
        except SpecError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        if layout.partition_bits != spec.partition_bits:
            print(
                f"error: previous layout uses partition_bits={layout.partition_bits}"
                f" but the spec declares {spec.partition_bits};"
                " changing partition bits is not supported",
                file=sys.stderr,
            )
            return EXIT_INFEASIBLE
        previous = layout.to_assignment()
        version = layout.version + 1

    try:
        assignment, metrics = compute_layout(
            spec, previous, rng_seed=args.seed, budget_ms=args.timeout_ms
        )
    except (InfeasibleError, PreviousLayoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    doc = layout_to_doc(version, spec, assignment, metrics)
    try:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(doc))
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO

    if args.json:
        print(canonical_json({"version": version, "metrics": doc["metrics"]}), end="")
    else:
        print(f"wrote layout version {version} to {args.out}")
        _print_human_report(metrics)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    try:
        layout = parse_layout(_read_json(args.layout))
        spec = parse_spec(_read_json(args.spec))
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    violations = []
    if layout.partition_bits != spec.partition_bits:
        violations.append(
            f"layout partition_bits {layout.partition_bits}"
            f" != spec partition_bits {spec.partition_bits}"
        )
    else:
        violations.extend(layout.to_assignment().validate(spec))
    if violations:
        for v in violations:
            print(f"violation: {v}")
        return EXIT_INVALID
    print("layout is valid for this spec")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    try:
        spec = parse_spec(_read_json(args.spec))
        previous = None
        if args.previous:
            layout = parse_layout(_read_json(args.previous))
            if layout.partition_bits != spec.partition_bits:
                print("error: previous layout partition_bits mismatch", file=sys.stderr)
                return EXIT_INFEASIBLE
            previous = layout.to_assignment()
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        result = brute_force_optimal_size(spec)
    except OracleGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE_GUARD
    if not result.feasible:
        print("infeasible: no valid assignment exists", file=sys.stderr)
        return EXIT_INFEASIBLE

    doc: dict[str, Any] = {
        "best_size": result.best_size,
        "optimal_assignment_count": len(result.optimal_assignments),
    }
    if previous is not None:
        doc["min_distance"] = brute_force_min_distance(spec, result.best_size, previous)
    if args.json:
        print(canonical_json(doc), end="")
    else:
        print(f"best_size: {doc['best_size']}")
        print(f"optimal assignments found: {doc['optimal_assignment_count']}")
        if "min_distance" in doc:
            print(f"min_distance: {doc['min_distance']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partplan",
        description="Compute zone-aware partition placements for a storage cluster.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    compute = sub.add_parser("compute", help="compute a new layout from a cluster spec")
    compute.add_argument("--spec", required=True, help="cluster spec JSON file")
    compute.add_argument("--previous", help="previous layout JSON file")
    compute.add_argument("--out", required=True, help="where to write the new layout")
    compute.add_argument("--seed", type=int, default=0,
                         help="RNG seed; 0 is the deterministic demo mode (default)")
    compute.add_argument("--timeout-ms", type=int, default=None,
                         help="wall-clock cap for transfer minimization")
    compute.add_argument("--json", action="store_true",
                         help="print the metrics report as one JSON object")
    compute.set_defaults(func=cmd_compute)

    check = sub.add_parser("check", help="validate a layout file against a spec")
    check.add_argument("--layout", required=True)
    check.add_argument("--spec", required=True)
    check.set_defaults(func=cmd_check)

    oracle = sub.add_parser("oracle", help="exhaustive reference answer for small instances")
    oracle.add_argument("--spec", required=True)
    oracle.add_argument("--previous", help="previous layout JSON file")
    oracle.add_argument("--json", action="store_true")
    oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
