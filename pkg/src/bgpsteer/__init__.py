"""AS-level BGP simulation with community-triggered ingress policies and an
inbound traffic-engineering planner for stub ASes."""

from .engine import (
    Advertisement,
    ConvergedState,
    OscillationError,
    TeConfig,
    best_route,
    propagate_to_convergence,
)
from .flows import (
    UNREACHABLE,
    Flow,
    FlowClass,
    IngressMap,
    classify,
    diff_ingress,
    ingress_map,
    resolve_forwarding,
)
from .planner import (
    Action,
    ActionKind,
    Budget,
    EvaluationReport,
    Exhausted,
    Infeasible,
    InfeasibilityWitness,
    Objective,
    Plan,
    PlanningError,
    SAME_PROVIDER,
    common_upstream_check,
    evaluate_plan,
    plan_inbound_te,
    te_config_from_actions,
)
from .policies import (
    AnnotatedRoute,
    PeerSelector,
    PolicyCatalog,
    egress_apply,
    ingress_transform,
    parse_community,
)
from .routes import (
    Community,
    Route,
    compare_routes,
    default_local_pref,
    export_permitted,
    local_route,
    prepend_path,
)
from .scenario import Scenario, ScenarioError, parse_scenario, parse_topology, serialize_scenario
from .topology import (
    LOCAL,
    Finding,
    Link,
    Prefix,
    Rel,
    Topology,
    TopologyError,
    ValidationReport,
    relationship_between,
    validate_topology,
)

__all__ = [
    "Action",
    "ActionKind",
    "Advertisement",
    "AnnotatedRoute",
    "Budget",
    "Community",
    "ConvergedState",
    "EvaluationReport",
    "Exhausted",
    "Finding",
    "Flow",
    "FlowClass",
    "Infeasible",
    "InfeasibilityWitness",
    "IngressMap",
    "LOCAL",
    "Link",
    "Objective",
    "OscillationError",
    "PeerSelector",
    "Plan",
    "PlanningError",
    "PolicyCatalog",
    "Prefix",
    "Rel",
    "Route",
    "SAME_PROVIDER",
    "Scenario",
    "ScenarioError",
    "TeConfig",
    "Topology",
    "TopologyError",
    "UNREACHABLE",
    "ValidationReport",
    "best_route",
    "classify",
    "common_upstream_check",
    "compare_routes",
    "default_local_pref",
    "diff_ingress",
    "egress_apply",
    "evaluate_plan",
    "export_permitted",
    "ingress_map",
    "ingress_transform",
    "local_route",
    "parse_community",
    "parse_scenario",
    "parse_topology",
    "plan_inbound_te",
    "prepend_path",
    "propagate_to_convergence",
    "relationship_between",
    "resolve_forwarding",
    "serialize_scenario",
    "te_config_from_actions",
    "validate_topology",
]
