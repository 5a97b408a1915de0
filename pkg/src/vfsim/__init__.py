"""Validity-frame driven multi-fidelity simulation for lane-change decisions."""
from vfsim.compiler import (DecisionTree, HeatMap, build_tree, expected_path_length,
                            graph_search_baseline, lookup, order_factors_by_heatmap,
                            prune_for_deadline)
from vfsim.errors import (ConsistencyError, CycleError, DeadlineInfeasibleError,
                          InvalidArgumentError, InvalidOrderingError, MissingFactorError,
                          ModelEvaluationError, NoFeasibleModelError, ParseError, VFSimError)
from vfsim.frames import (Context, EnumDomain, ExecutionSpec, FactorSet, Interval, PropertySet,
                          Status, ValidityFrame, ValidityRecord, frame_admits)
from vfsim.models import (Blinker, ManeuverDecision, ManeuverKind, PlannerConfig, Role,
                          Scenario, ScriptEvent, Trajectory, VehicleState, decisions_match,
                          plan_maneuver, predict_approximated, predict_detailed,
                          predict_original)
from vfsim.runtime import (KnowledgeBase, Library, ModelSpec, StepRecord, analyze,
                           build_knowledge, execute, monitor, plan_select,
                           run_adaptive_simulation)
from vfsim.vfg import Edge, EdgeKind, VFGraph, enumerate_admissible

__version__ = "0.1.0"

__all__ = [
    "Blinker",
    "ConsistencyError",
    "Context",
    "CycleError",
    "DeadlineInfeasibleError",
    "DecisionTree",
    "Edge",
    "EdgeKind",
    "EnumDomain",
    "ExecutionSpec",
    "FactorSet",
    "HeatMap",
    "Interval",
    "InvalidArgumentError",
    "InvalidOrderingError",
    "KnowledgeBase",
    "Library",
    "ManeuverDecision",
    "ManeuverKind",
    "MissingFactorError",
    "ModelEvaluationError",
    "ModelSpec",
    "NoFeasibleModelError",
    "ParseError",
    "PlannerConfig",
    "PropertySet",
    "Role",
    "Scenario",
    "ScriptEvent",
    "Status",
    "StepRecord",
    "Trajectory",
    "VFGraph",
    "VFSimError",
    "ValidityFrame",
    "ValidityRecord",
    "VehicleState",
    "analyze",
    "build_knowledge",
    "build_tree",
    "decisions_match",
    "enumerate_admissible",
    "execute",
    "expected_path_length",
    "frame_admits",
    "graph_search_baseline",
    "lookup",
    "monitor",
    "order_factors_by_heatmap",
    "plan_maneuver",
    "plan_select",
    "predict_approximated",
    "predict_detailed",
    "predict_original",
    "prune_for_deadline",
    "run_adaptive_simulation",
]
