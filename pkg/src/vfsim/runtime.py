"""Monitor / analyze / plan / execute loop over a shared knowledge base."""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

from vfsim.compiler import (DecisionTree, HeatMap, build_tree, choose_ordering, leaf_pairs,
                            lookup, prune_for_deadline)
from vfsim.errors import (DeadlineInfeasibleError, InvalidArgumentError, ModelEvaluationError,
                          NoFeasibleModelError)
from vfsim.frames import Context, PropertySet, frame_admits
from vfsim.models import (Blinker, ManeuverDecision, ManeuverKind, Role, Scenario,
                          VehicleState, constant_lane_predictions, decisions_match,
                          plan_maneuver, predict_detailed)
from vfsim.vfg import VFGraph

log = logging.getLogger(__name__)

MODEL_KINDS = ("original", "approximated", "detailed")


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    kind: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidArgumentError(
                f"model {self.model_id}: kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "params", dict(self.params))


@dataclass
class Library:
    """Model registry plus the validity frame graph over it."""
    models: dict
    graph: VFGraph
    requested: PropertySet

    def model_for(self, frame_id: str) -> ModelSpec:
        return self.models[self.graph[frame_id].model_id]

    def default_ordering(self) -> list:
        """Influencing factors in the order frames first declare them."""
        seen = []
        for fr in self.graph.frames.values():
            for name in fr.gamma:
                if name not in seen:
                    seen.append(name)
        return seen


@dataclass
class KnowledgeBase:
    library: Library
    tree: DecisionTree
    heatmap: HeatMap = field(default_factory=HeatMap)
    provenance: dict = field(default_factory=dict)

    @property
    def graph(self) -> VFGraph:
        return self.library.graph

    @property
    def models(self) -> dict:
        return self.library.models

    def cell_of(self, context: Mapping) -> tuple:
        """Heat-map cell: booleans and labels as-is, numbers snapped to the tree's cells."""
        cell = {}
        for name, value in context.items():
            branches = self.tree.factor_cells.get(name)
            if isinstance(value, (bool, str)):
                cell[name] = value
            elif branches is not None:
                br = next((b for b in branches if b.matches(value)), None)
                cell[name] = None if br is None else br.representative()
        return HeatMap.cell(cell)


def build_knowledge(library: Library, deadline: Optional[float] = None,
                    ordering=None, heatmap: Optional[HeatMap] = None) -> KnowledgeBase:
    if ordering is None:
        ordering = library.default_ordering()
        if heatmap is not None and heatmap.total:
            ordering = choose_ordering(library.graph, library.requested, heatmap, ordering)
    tree = build_tree(library.graph, ordering, library.requested)
    if deadline is not None:
        tree = prune_for_deadline(tree, deadline)
    provenance = {"ordering": tuple(tree.ordering), "deadline": deadline,
                  "frames": tuple(sorted(library.graph.frames)),
                  "edges": tuple(sorted(library.graph.edges))}
    return KnowledgeBase(library, tree, HeatMap(), provenance)


@dataclass(frozen=True)
class StepRecord:
    t: float
    context: Context
    candidates: tuple
    selected: str
    decision: ManeuverDecision
    ego_state: VehicleState
    step_cost: float
    switched: bool
    compared: bool = False
    pair: Optional[tuple] = None
    original_decision: Optional[ManeuverDecision] = None
    approximated_decision: Optional[ManeuverDecision] = None


@dataclass
class Selection:
    frame_id: str
    decision: ManeuverDecision
    trajectory: object
    cost: float
    compared: bool = False
    pair: Optional[tuple] = None
    original_decision: Optional[ManeuverDecision] = None
    approximated_decision: Optional[ManeuverDecision] = None


def run_pipeline(model: ModelSpec, world: Scenario):
    """Predict the other vehicles with ``model`` and plan the ego against them."""
    ego = world.ego
    others = [veh for veh in world.vehicles if veh.vehicle_id != ego.vehicle_id]
    try:
        if model.kind == "detailed":
            preds = predict_detailed(world, kinematics=model.params.get("kinematics", "original"),
                                     scope=model.params.get("scope", "all"))
            preds.pop(ego.vehicle_id, None)
        else:
            preds = constant_lane_predictions(others, model.kind, world.horizon, world.dt)
        return plan_maneuver(ego, preds, world)
    except InvalidArgumentError as exc:
        raise ModelEvaluationError(f"model {model.model_id} failed: {exc}") from exc


def monitor(world: Scenario, kb: Optional[KnowledgeBase] = None) -> Context:
    """Read the influencing factors off the world; counts the cell in the heat map."""
    ego = world.ego
    values = {"blinking": any(veh.blinker is not Blinker.OFF
                              for veh in world.vehicles if veh.role is not Role.EGO)}
    for name in world.observe:
        if name == "gap_ahead":
            gaps = [veh.x - ego.x for veh in world.vehicles
                    if veh.vehicle_id != ego.vehicle_id and veh.lane == ego.lane
                    and veh.x >= ego.x]
            values[name] = min(gaps) if gaps else math.inf
        elif name == "ego_speed":
            values[name] = ego.v
        else:
            raise InvalidArgumentError(f"unknown observation {name!r}")
    context = Context(values)
    if kb is not None:
        kb.heatmap.add(kb.cell_of(context))
    return context


def analyze(context: Mapping, kb: KnowledgeBase, deadline: float) -> list:
    try:
        candidates, _ = lookup(kb.tree, context)
    except NoFeasibleModelError as exc:
        candidates, reason = [], str(exc)
    else:
        reason = "every candidate is invalidated"
    candidates = [c for c in candidates if not kb.graph[c].invalidated]
    if candidates:
        return candidates
    head = kb.graph.head
    if head is not None:
        frame = kb.graph[head]
        if (frame.wcet <= deadline and not frame.invalidated
                and frame_admits(frame, context)):
            return [head]
    raise DeadlineInfeasibleError(
        f"no model fits the {deadline} budget in context {dict(context)} ({reason}); "
        f"head {head!r} cannot stand in")


def _pick_pair(candidates, kb):
    pairs = leaf_pairs(candidates, kb.tree.pairs)
    if not pairs:
        return None
    wcet = kb.tree.wcet
    return min(pairs, key=lambda p: (wcet[p[1]], wcet[p[0]], p))


def plan_select(candidates, world: Scenario, kb: KnowledgeBase) -> Selection:
    """Choose a frame from a leaf's candidates and produce its decision.

    With an original/approximated pair present, both pipelines run and the
    approximated frame is used only when the two decisions agree.
    """
    candidates = list(candidates)
    if not candidates:
        raise DeadlineInfeasibleError("no candidate model left to evaluate")
    wcet = kb.tree.wcet
    pair = _pick_pair(candidates, kb)
    if pair is not None:
        orig, approx = pair
        try:
            d_orig, tr_orig = run_pipeline(kb.library.model_for(orig), world)
            d_appr, tr_appr = run_pipeline(kb.library.model_for(approx), world)
        except ModelEvaluationError as exc:
            log.warning("comparison %s/%s failed: %s", orig, approx, exc)
            rest = plan_select([c for c in candidates if c not in pair], world, kb)
            rest.cost += wcet[orig] + wcet[approx]
            return rest
        cost = wcet[orig] + wcet[approx]
        if decisions_match(d_orig, d_appr, world.tol_t):
            sel = Selection(approx, d_appr, tr_appr, cost)
        else:
            sel = Selection(orig, d_orig, tr_orig, cost)
        sel.compared, sel.pair = True, pair
        sel.original_decision, sel.approximated_decision = d_orig, d_appr
        return sel

    spent = 0.0
    for fid in candidates:
        spent += wcet[fid]
        try:
            decision, traj = run_pipeline(kb.library.model_for(fid), world)
        except ModelEvaluationError as exc:
            log.warning("model %s failed, trying next candidate: %s", fid, exc)
            continue
        return Selection(fid, decision, traj, spent)
    raise DeadlineInfeasibleError(f"every candidate failed to evaluate: {candidates}")


def advance(vehicle: VehicleState, dt: float) -> VehicleState:
    """Constant-acceleration step; a braking vehicle stops instead of reversing."""
    v_next = vehicle.v + vehicle.a * dt
    if v_next >= 0.0:
        x = vehicle.x + vehicle.v * dt + 0.5 * vehicle.a * dt * dt
        return dataclasses.replace(vehicle, x=x, v=v_next)
    stop = -vehicle.v / vehicle.a
    x = vehicle.x + vehicle.v * stop + 0.5 * vehicle.a * stop * stop
    return dataclasses.replace(vehicle, x=x, v=0.0)


def execute(selection: Selection, world: Scenario) -> list:
    """Apply the ego decision and advance every vehicle by one step.

    The ego follows the first interval of its planned trajectory and switches
    lane when the maneuver starts within this step; every other vehicle moves
    by its own kinematics.
    """
    dt = world.dt
    out = []
    for veh in world.vehicles:
        if veh.role is not Role.EGO:
            out.append(advance(veh, dt))
            continue
        traj, decision = selection.trajectory, selection.decision
        lane = veh.lane
        if decision.kind is not ManeuverKind.KEEP_LANE and decision.t_start < 0.5 * dt:
            lane = decision.target_lane
        v_next = float(traj.v[1])
        out.append(dataclasses.replace(veh, x=float(traj.x[1]), v=v_next, lane=lane,
                                       a=(v_next - veh.v) / dt))
    return out


def _fire_events(world, events, t, fired):
    vehicles = list(world)
    for idx, ev in enumerate(events):
        if idx in fired or ev.t > t + 1e-9:
            continue
        fired.add(idx)
        for i, veh in enumerate(vehicles):
            if veh.vehicle_id != ev.vehicle_id:
                continue
            changes = {}
            if ev.blinker is not None:
                changes["blinker"] = ev.blinker
            if ev.lane is not None:
                changes["lane"] = ev.lane
            vehicles[i] = dataclasses.replace(veh, **changes)
    return vehicles


def run_adaptive_simulation(scenario: Scenario, kb: KnowledgeBase,
                            force_model: Optional[str] = None,
                            recheck: Optional[int] = None) -> list:
    """Run the closed loop for ``duration / dt`` steps and return the step records.

    The original/approximated comparison is repeated every ``recheck`` steps or
    as soon as the context cell or candidate set changes; in between the last
    selection is reused and only that model runs.
    """
    recheck = scenario.recheck if recheck is None else recheck
    if recheck < 1:
        raise InvalidArgumentError("recheck period must be >= 1")
    deadline = scenario.deadline
    if force_model is not None:
        if force_model not in kb.graph:
            raise InvalidArgumentError(f"unknown frame {force_model!r}")
        if kb.graph[force_model].wcet > deadline:
            raise DeadlineInfeasibleError(
                f"forced frame {force_model!r} (wcet {kb.graph[force_model].wcet}) "
                f"exceeds deadline {deadline}")

    n_steps = int(math.floor(scenario.duration / scenario.dt + 1e-9))
    events = sorted(scenario.events, key=lambda ev: ev.t)
    fired: set = set()
    vehicles = list(scenario.vehicles)
    records = []
    previous = None
    held = None  # (frame_id, cell, candidates, step of last comparison)
    for step in range(n_steps):
        t = step * scenario.dt
        vehicles = _fire_events(vehicles, events, t, fired)
        world = scenario.with_vehicles(vehicles)
        context = monitor(world, kb)

        if force_model is not None:
            candidates = [force_model]
            decision, traj = run_pipeline(kb.library.model_for(force_model), world)
            selection = Selection(force_model, decision, traj, kb.graph[force_model].wcet)
        else:
            candidates = analyze(context, kb, deadline)
            cell = kb.cell_of(context)
            reuse = (held is not None and held[0] in candidates and held[1] == cell
                     and held[2] == tuple(candidates) and step - held[3] < recheck)
            if reuse:
                fid = held[0]
                decision, traj = run_pipeline(kb.library.model_for(fid), world)
                selection = Selection(fid, decision, traj, kb.tree.wcet[fid])
            else:
                selection = plan_select(candidates, world, kb)
                held = (selection.frame_id, cell, tuple(candidates), step)
        if selection.cost > deadline + 1e-9:
            raise DeadlineInfeasibleError(
                f"step at t={t:g} cost {selection.cost} exceeds deadline {deadline}")

        vehicles = execute(selection, world)
        ego = next(veh for veh in vehicles if veh.role is Role.EGO)
        records.append(StepRecord(
            t=t, context=context, candidates=tuple(candidates), selected=selection.frame_id,
            decision=selection.decision, ego_state=ego, step_cost=selection.cost,
            switched=previous is not None and previous != selection.frame_id,
            compared=selection.compared, pair=selection.pair,
            original_decision=selection.original_decision,
            approximated_decision=selection.approximated_decision))
        previous = selection.frame_id
    return records
