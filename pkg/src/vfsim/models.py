"""Prediction models at three fidelity levels and the maneuver planner.

Lane indices grow to the right: lane 0 is the leftmost lane, so a
``ChangeLeft`` maneuver always targets ``lane - 1``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from vfsim import _kernels
from vfsim.errors import InvalidArgumentError

_EPS = 1e-9


class Blinker(str, Enum):
    OFF = "Off"
    LEFT = "Left"
    RIGHT = "Right"


class Role(str, Enum):
    EGO = "Ego"
    MC = "MC"
    FC = "FC"
    OTHER = "Other"


class ManeuverKind(str, Enum):
    KEEP_LANE = "KeepLane"
    CHANGE_LEFT = "ChangeLeft"
    CHANGE_RIGHT = "ChangeRight"


@dataclass(frozen=True)
class VehicleState:
    vehicle_id: str
    x: float
    lane: int
    v: float
    a: float = 0.0
    blinker: Blinker = Blinker.OFF
    role: Role = Role.OTHER

    def __post_init__(self):
        if self.v < 0:
            raise InvalidArgumentError(
                f"vehicle {self.vehicle_id}: velocity must be >= 0, got {self.v}")
        if not isinstance(self.blinker, Blinker):
            object.__setattr__(self, "blinker", Blinker(self.blinker))
        if not isinstance(self.role, Role):
            object.__setattr__(self, "role", Role(self.role))


@dataclass(frozen=True)
class ManeuverDecision:
    kind: ManeuverKind
    t_start: float
    target_lane: int
    emergency: bool = False


def decisions_match(first: ManeuverDecision, second: ManeuverDecision, tol_t: float) -> bool:
    """Decision-level equality used to license the approximated model."""
    return (first.kind == second.kind
            and first.target_lane == second.target_lane
            and abs(first.t_start - second.t_start) <= tol_t + _EPS)


@dataclass(frozen=True)
class PlannerConfig:
    w_speed: float = 1.0
    w_change: float = 0.1
    headway: float = 2.0
    min_gap: float = 5.0
    window: float = 1.0
    accel_max: float = 2.0
    brake_max: float = 4.0
    initiation: tuple = (0.0, 0.25, 0.5, 0.75)
    desired_speed: Optional[float] = None
    tol_t: Optional[float] = None


@dataclass(frozen=True)
class ScriptEvent:
    """A scripted change to a non-ego vehicle: its blinker and/or its lane."""
    t: float
    vehicle_id: str
    blinker: Optional[Blinker] = None
    lane: Optional[int] = None


@dataclass(frozen=True)
class Scenario:
    vehicles: tuple
    dt: float
    horizon: float
    deadline: float
    duration: float
    lane_count: int = 3
    lane_width: float = 3.5
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    events: tuple = ()
    recheck: int = 10
    observe: tuple = ()
    desired_speeds: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "observe", tuple(self.observe))
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if not self.horizon >= self.dt:
            raise InvalidArgumentError(f"horizon ({self.horizon}) must be >= dt ({self.dt})")
        if not self.deadline > 0:
            raise InvalidArgumentError(f"deadline must be positive, got {self.deadline}")
        if self.duration < 0:
            raise InvalidArgumentError(f"duration must be >= 0, got {self.duration}")
        if self.lane_count < 1:
            raise InvalidArgumentError("lane_count must be >= 1")
        if self.recheck < 1:
            raise InvalidArgumentError("recheck period must be >= 1")
        egos = [veh for veh in self.vehicles if veh.role is Role.EGO]
        if len(egos) != 1:
            raise InvalidArgumentError(
                f"scenario needs exactly one Ego vehicle, found {len(egos)}")
        ids = [veh.vehicle_id for veh in self.vehicles]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError("vehicle ids must be unique")
        for veh in self.vehicles:
            if not 0 <= veh.lane < self.lane_count:
                raise InvalidArgumentError(
                    f"vehicle {veh.vehicle_id}: lane {veh.lane} outside [0, {self.lane_count})")
        if self.desired_speeds is None:
            desired = {veh.vehicle_id: veh.v for veh in self.vehicles}
            if self.planner.desired_speed is not None:
                desired[egos[0].vehicle_id] = self.planner.desired_speed
            object.__setattr__(self, "desired_speeds", desired)

    @property
    def ego(self) -> VehicleState:
        return next(veh for veh in self.vehicles if veh.role is Role.EGO)

    def vehicle(self, vehicle_id: str) -> VehicleState:
        for veh in self.vehicles:
            if veh.vehicle_id == vehicle_id:
                return veh
        raise KeyError(vehicle_id)

    def desired_speed(self, vehicle: VehicleState) -> float:
        return self.desired_speeds.get(vehicle.vehicle_id, vehicle.v)

    @property
    def tol_t(self) -> float:
        return self.dt if self.planner.tol_t is None else self.planner.tol_t

    def with_vehicles(self, vehicles) -> "Scenario":
        return dataclasses.replace(self, vehicles=tuple(vehicles))


@dataclass(eq=False)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    lane: np.ndarray
    maneuvers: list

    @property
    def samples(self):
        return [(float(t), float(x), int(lane))
                for t, x, lane in zip(self.t, self.x, self.lane)]

    def secondary_lanes(self, dt: float, window: float) -> np.ndarray:
        """Second occupied lane per sample while a lane change is in progress (-1 otherwise)."""
        out = np.full(len(self.t), -1, dtype=np.int64)
        k_win = _window_steps(window, dt)
        for m in self.maneuvers:
            if m.kind is ManeuverKind.KEEP_LANE:
                continue
            k_s = int(round(m.t_start / dt))
            if k_s >= len(self.t):
                continue
            source = int(self.lane[k_s])
            for k in range(k_s, min(k_s + k_win, len(self.t))):
                out[k] = m.target_lane if k == k_s else source
        return out


def _check_grid(horizon, dt):
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if not horizon > 0 or horizon < dt:
        raise InvalidArgumentError(f"horizon must be >= dt > 0, got horizon={horizon}, dt={dt}")


def sample_times(horizon: float, dt: float) -> np.ndarray:
    _check_grid(horizon, dt)
    n = int(math.floor(horizon / dt + _EPS))
    return np.arange(n + 1, dtype=np.float64) * dt


def _window_steps(window, dt):
    return max(1, int(math.ceil(window / dt - _EPS)))


def _keep(state):
    return [ManeuverDecision(ManeuverKind.KEEP_LANE, 0.0, state.lane)]


def predict_original(state: VehicleState, horizon: float, dt: float) -> Trajectory:
    """Constant-acceleration kinematics, lane held for the whole horizon."""
    t = sample_times(horizon, dt)
    x, v = _kernels.kinematic(float(state.x), float(state.v), float(state.a), t)
    lane = np.full(len(t), state.lane, dtype=np.int64)
    return Trajectory(t, x, v, lane, _keep(state))


def predict_approximated(state: VehicleState, horizon: float, dt: float) -> Trajectory:
    """Same as :func:`predict_original` with the acceleration term dropped."""
    t = sample_times(horizon, dt)
    x, v = _kernels.constant_velocity(float(state.x), float(state.v), t)
    lane = np.full(len(t), state.lane, dtype=np.int64)
    return Trajectory(t, x, v, lane, _keep(state))


KINEMATICS = {
    "original": predict_original,
    "approximated": predict_approximated,
}


def _stack_others(others: Mapping[str, Trajectory], n: int, dt: float, window: float, t_grid):
    ids = sorted(others)
    m = len(ids)
    ox = np.empty((m, n + 1))
    ov = np.empty((m, n + 1))
    olane = np.empty((m, n + 1), dtype=np.int64)
    olane2 = np.empty((m, n + 1), dtype=np.int64)
    for row, vid in enumerate(ids):
        traj = others[vid]
        if len(traj.t) < n + 1 or not np.allclose(traj.t[:n + 1], t_grid, atol=1e-9):
            raise InvalidArgumentError(
                f"trajectory of {vid} does not cover the planning grid [0, {t_grid[-1]}]")
        ox[row] = traj.x[:n + 1]
        ov[row] = traj.v[:n + 1]
        olane[row] = traj.lane[:n + 1]
        olane2[row] = traj.secondary_lanes(dt, window)[:n + 1]
    return ox, olane, olane2, ov


@dataclass(frozen=True)
class _Candidate:
    decision: ManeuverDecision
    trajectory: Trajectory
    feasible: bool
    cost: float

    def rank(self):
        d = self.decision
        return (self.cost, d.kind is not ManeuverKind.KEEP_LANE, d.t_start, d.target_lane)


def _candidate_decisions(ego, scenario, only=None):
    n = len(sample_times(scenario.horizon, scenario.dt)) - 1
    decisions = [ManeuverDecision(ManeuverKind.KEEP_LANE, 0.0, ego.lane)]
    starts = sorted({min(n, int(round(f * scenario.horizon / scenario.dt)))
                     for f in scenario.planner.initiation})
    for kind, step in ((ManeuverKind.CHANGE_LEFT, -1), (ManeuverKind.CHANGE_RIGHT, 1)):
        target = ego.lane + step
        if not 0 <= target < scenario.lane_count:
            continue
        for k in starts:
            decisions.append(ManeuverDecision(kind, k * scenario.dt, target))
    if only is not None:
        decisions = [d for d in decisions if d.kind is only]
    return decisions


def _evaluate(ego, decision, arrays, scenario, t_grid):
    cfg = scenario.planner
    dt = scenario.dt
    n = len(t_grid) - 1
    k_start = int(round(decision.t_start / dt))
    x, v, lane, feasible, deficit = _kernels.rollout(
        float(ego.x), float(ego.v), float(scenario.desired_speed(ego)),
        int(ego.lane), int(decision.target_lane), k_start, _window_steps(cfg.window, dt),
        n, float(dt), *arrays,
        float(cfg.headway), float(cfg.min_gap), float(cfg.accel_max), float(cfg.brake_max))
    changed = decision.kind is not ManeuverKind.KEEP_LANE
    cost = cfg.w_speed * deficit + cfg.w_change * (1.0 if changed else 0.0)
    traj = Trajectory(t_grid.copy(), x, v, lane, [decision])
    return _Candidate(decision, traj, bool(feasible), float(cost))


def plan_maneuver(ego: VehicleState, others: Mapping[str, Trajectory], scenario: Scenario,
                  *, only: Optional[ManeuverKind] = None, first_feasible: bool = False):
    """Choose the cheapest safe maneuver for ``ego`` against predicted ``others``.

    ``only`` restricts the candidate set to one maneuver kind; with
    ``first_feasible`` the earliest safe candidate wins instead of the cheapest.
    Returns ``(decision, trajectory)``. When every candidate breaks a safety gap
    the result is ``KeepLane`` with ``emergency=True``.
    """
    t_grid = sample_times(scenario.horizon, scenario.dt)
    n = len(t_grid) - 1
    others = {vid: tr for vid, tr in others.items() if vid != ego.vehicle_id}
    arrays = _stack_others(others, n, scenario.dt, scenario.planner.window, t_grid)

    candidates = [_evaluate(ego, d, arrays, scenario, t_grid)
                  for d in _candidate_decisions(ego, scenario, only)]
    feasible = [c for c in candidates if c.feasible]
    if feasible:
        if first_feasible:
            best = min(feasible, key=lambda c: (c.decision.t_start, c.decision.target_lane))
        else:
            best = min(feasible, key=_Candidate.rank)
        return best.decision, best.trajectory

    keep = ManeuverDecision(ManeuverKind.KEEP_LANE, 0.0, ego.lane)
    fallback = _evaluate(ego, keep, arrays, scenario, t_grid)
    decision = dataclasses.replace(keep, emergency=True)
    fallback.trajectory.maneuvers = [decision]
    return decision, fallback.trajectory


def _intent(vehicle):
    if vehicle.blinker is Blinker.LEFT:
        return ManeuverKind.CHANGE_LEFT
    if vehicle.blinker is Blinker.RIGHT:
        return ManeuverKind.CHANGE_RIGHT
    return None


def predict_detailed(scenario: Scenario, horizon: Optional[float] = None, *,
                     kinematics: str = "original", scope: str = "all") -> dict:
    """Plan every vehicle as if it were the ego.

    Each vehicle is planned against constant-lane kinematic predictions of all
    the others. A blinking vehicle takes the earliest safe lane change towards
    its blinker; if none is safe it is planned normally. With
    ``scope="signalled"`` only blinking vehicles are replanned and the rest keep
    their kinematic prediction.
    """
    if kinematics not in KINEMATICS:
        raise InvalidArgumentError(f"unknown kinematics {kinematics!r}")
    if scope not in ("all", "signalled"):
        raise InvalidArgumentError(f"unknown scope {scope!r}")
    if horizon is not None and horizon != scenario.horizon:
        scenario = dataclasses.replace(scenario, horizon=horizon)
    predict = KINEMATICS[kinematics]
    base = {veh.vehicle_id: predict(veh, scenario.horizon, scenario.dt)
            for veh in scenario.vehicles}

    out = {}
    for veh in scenario.vehicles:
        intent = _intent(veh)
        if scope == "signalled" and intent is None:
            out[veh.vehicle_id] = base[veh.vehicle_id]
            continue
        others = {vid: tr for vid, tr in base.items() if vid != veh.vehicle_id}
        decision = None
        if intent is not None:
            decision, traj = plan_maneuver(veh, others, scenario, only=intent,
                                           first_feasible=True)
            if decision.emergency or decision.kind is not intent:
                decision = None
        if decision is None:
            decision, traj = plan_maneuver(veh, others, scenario)
        out[veh.vehicle_id] = traj
    return out


def constant_lane_predictions(vehicles: Sequence[VehicleState], kinematics: str,
                              horizon: float, dt: float) -> dict:
    predict = KINEMATICS[kinematics]
    return {veh.vehicle_id: predict(veh, horizon, dt) for veh in vehicles}
