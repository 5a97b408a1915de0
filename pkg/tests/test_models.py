import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vfsim.errors import InvalidArgumentError
from vfsim.models import (Blinker, ManeuverDecision, ManeuverKind, PlannerConfig, Role,
                          Scenario, VehicleState, constant_lane_predictions, decisions_match,
                          plan_maneuver, predict_approximated, predict_detailed,
                          predict_original)

KEEP = ManeuverKind.KEEP_LANE
LEFT = ManeuverKind.CHANGE_LEFT


def veh(vid, x, v, a=0.0, lane=0, **kw):
    return VehicleState(vid, x, lane, v, a, **kw)


def x_at(traj, t):
    idx = int(np.argmin(np.abs(traj.t - t)))
    assert traj.t[idx] == pytest.approx(t)
    return traj.x[idx]


def fig3(mc_blinker=Blinker.OFF, **kw):
    cars = (VehicleState("ego", 0.0, 2, 30.0, role=Role.EGO),
            VehicleState("mc", 70.0, 2, 25.0, blinker=mc_blinker, role=Role.MC),
            VehicleState("fc", 150.0, 2, 20.0, role=Role.FC))
    return Scenario(cars, dt=0.25, horizon=6.0, deadline=60.0, duration=10.0, **kw)


def euler(x0, v0, a, t_end, h=1e-4):
    # Independent oracle: semi-implicit Euler on x'' = a.
    x, v = x0, v0
    for _ in range(int(round(t_end / h))):
        v_mid = v + 0.5 * a * h
        x += v_mid * h
        v += a * h
    return x


class TestPredictOriginal:
    def test_zero_acceleration_is_linear(self):
        assert x_at(predict_original(veh("a", 0, 10), 1.0, 0.25), 1.0) == 10.0

    def test_rest_stays_at_rest(self):
        tr = predict_original(veh("a", 0, 0), 5.0, 0.5)
        assert np.all(tr.x == 0.0)

    def test_closed_form_against_euler(self):
        tr = predict_original(veh("a", 1, 5, 2), 2.0, 0.5)
        assert x_at(tr, 2.0) == 15.0
        assert abs(euler(1.0, 5.0, 2.0, 2.0) - 15.0) <= 1e-2

    def test_keeps_lane_and_reports_keeplane(self):
        tr = predict_original(veh("a", 0, 10, 1, lane=2), 3.0, 1.0)
        assert set(tr.lane.tolist()) == {2}
        assert [m.kind for m in tr.maneuvers] == [KEEP]
        assert tr.samples[0] == (0.0, 0.0, 2)

    @pytest.mark.parametrize("horizon,dt", [(1.0, 0.0), (1.0, -0.1), (0.0, 0.1), (0.05, 0.1)])
    def test_bad_grid_rejected(self, horizon, dt):
        with pytest.raises(InvalidArgumentError):
            predict_original(veh("a", 0, 1), horizon, dt)
        with pytest.raises(InvalidArgumentError):
            predict_approximated(veh("a", 0, 1), horizon, dt)


class TestPredictApproximated:
    def test_acceleration_ignored(self):
        assert x_at(predict_approximated(veh("a", 0, 10, 3), 1.0, 0.5), 1.0) == 10.0

    def test_collapse_at_zero_acceleration(self):
        s = veh("a", 3.5, 12.25)
        a, b = predict_original(s, 4.0, 0.1), predict_approximated(s, 4.0, 0.1)
        assert a.x.tobytes() == b.x.tobytes()

    def test_gap_between_models(self):
        s = veh("a", 2, 7, 5)
        assert x_at(predict_approximated(s, 3.0, 1.0), 3.0) == 23.0
        assert x_at(predict_original(s, 3.0, 1.0), 3.0) == 45.5


finite = dict(allow_nan=False, allow_infinity=False)


@given(x0=st.floats(-1e3, 1e3, **finite), v=st.floats(0, 60, **finite),
       dt=st.sampled_from([0.05, 0.1, 0.25, 0.5, 1.0]), horizon=st.floats(1, 10, **finite))
def test_zero_acceleration_bitwise_equal(x0, v, dt, horizon):
    s = veh("a", x0, v)
    a, b = predict_original(s, horizon, dt), predict_approximated(s, horizon, dt)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.t.tobytes() == b.t.tobytes()


@given(v=st.floats(0, 60, **finite), a=st.floats(-5, 5, **finite),
       dt=st.sampled_from([0.1, 0.25, 0.5]), horizon=st.floats(1, 10, **finite))
def test_error_law(v, a, dt, horizon):
    s = veh("a", 0.0, v, a)
    o, p = predict_original(s, horizon, dt), predict_approximated(s, horizon, dt)
    assert np.all(np.abs(np.abs(o.x - p.x) - 0.5 * abs(a) * o.t ** 2) <= 1e-9)


@given(v=st.floats(0.01, 60, **finite), a=st.floats(0, 5, **finite))
def test_monotone_for_forward_motion(v, a):
    tr = predict_original(veh("a", 0.0, v, a), 10.0, 0.25)
    assert np.all(np.diff(tr.x) > 0)


class TestPlanner:
    def test_alone_keeps_lane(self):
        sc = Scenario((veh("ego", 0, 30, lane=1, role=Role.EGO),), 0.25, 6.0, 10.0, 1.0)
        d, tr = plan_maneuver(sc.ego, {}, sc)
        assert d == ManeuverDecision(KEEP, 0.0, 1)
        assert not d.emergency

    def test_fig3_overtakes_slower_mc(self):
        sc = fig3()
        others = constant_lane_predictions(sc.vehicles[1:], "original", sc.horizon, sc.dt)
        d, tr = plan_maneuver(sc.ego, others, sc)
        assert d.kind is LEFT and d.target_lane == 1

    def test_fig3_keeps_lane_when_mc_signals(self):
        sc = fig3(Blinker.LEFT)
        preds = predict_detailed(sc)
        preds.pop("ego")
        d, _ = plan_maneuver(sc.ego, preds, sc)
        assert d.kind is KEEP

    def test_blocked_everywhere_is_emergency(self):
        sc = Scenario((veh("ego", 0, 30, lane=0, role=Role.EGO), veh("w", 3, 30, lane=0)),
                      0.25, 4.0, 10.0, 1.0, lane_count=1)
        others = constant_lane_predictions(sc.vehicles[1:], "original", sc.horizon, sc.dt)
        d, tr = plan_maneuver(sc.ego, others, sc)
        assert d.kind is KEEP and d.emergency and d.target_lane == 0

    def test_tie_break_prefers_keeplane(self):
        # Empty road, zero change weight: every candidate costs the same.
        sc = Scenario((veh("ego", 0, 20, lane=1, role=Role.EGO),), 0.5, 4.0, 10.0, 1.0,
                      planner=PlannerConfig(w_change=0.0))
        assert plan_maneuver(sc.ego, {}, sc)[0].kind is KEEP

    def test_short_others_rejected(self):
        sc = fig3()
        short = {"mc": predict_original(sc.vehicles[1], 1.0, sc.dt)}
        with pytest.raises(InvalidArgumentError):
            plan_maneuver(sc.ego, short, sc)


class TestDetailed:
    def test_signalling_mc_changes_left(self):
        preds = predict_detailed(fig3(Blinker.LEFT))
        assert any(m.kind is LEFT for m in preds["mc"].maneuvers)
        assert preds["mc"].lane[-1] == 1

    def test_single_vehicle(self):
        sc = Scenario((veh("ego", 0, 20, lane=1, role=Role.EGO),), 0.5, 4.0, 10.0, 1.0)
        preds = predict_detailed(sc)
        assert list(preds) == ["ego"]
        assert [m.kind for m in preds["ego"].maneuvers] == [KEEP]

    def test_matches_per_car_planning_without_blinkers(self):
        sc = fig3()
        preds = predict_detailed(sc)
        base = constant_lane_predictions(sc.vehicles, "original", sc.horizon, sc.dt)
        for car in sc.vehicles:
            others = {k: v for k, v in base.items() if k != car.vehicle_id}
            d, tr = plan_maneuver(car, others, sc)
            assert preds[car.vehicle_id].maneuvers == [d]
            assert np.array_equal(preds[car.vehicle_id].x, tr.x)

    def test_unknown_scope(self):
        with pytest.raises(InvalidArgumentError):
            predict_detailed(fig3(), scope="some")


def test_decisions_match_rule():
    a = ManeuverDecision(LEFT, 1.0, 1)
    assert decisions_match(a, ManeuverDecision(LEFT, 1.25, 1), 0.25)
    assert not decisions_match(a, ManeuverDecision(LEFT, 1.5, 1), 0.25)
    assert not decisions_match(a, ManeuverDecision(LEFT, 1.0, 0), 0.25)
    assert not decisions_match(a, ManeuverDecision(KEEP, 1.0, 1), 0.25)


class TestScenario:
    def test_needs_one_ego(self):
        with pytest.raises(InvalidArgumentError):
            Scenario((veh("a", 0, 1),), 0.1, 1.0, 1.0, 1.0)

    def test_lane_range(self):
        with pytest.raises(InvalidArgumentError):
            Scenario((veh("a", 0, 1, lane=3, role=Role.EGO),), 0.1, 1.0, 1.0, 1.0)

    @pytest.mark.parametrize("kw", [dict(dt=0), dict(horizon=0.01), dict(deadline=0)])
    def test_grid_and_budget(self, kw):
        args = dict(dt=0.1, horizon=1.0, deadline=1.0, duration=1.0) | kw
        with pytest.raises(InvalidArgumentError):
            Scenario((veh("a", 0, 1, role=Role.EGO),), **args)

    def test_negative_speed(self):
        with pytest.raises(InvalidArgumentError):
            veh("a", 0, -1)


# -- planner properties ------------------------------------------------------

@st.composite
def traffic(draw):
    lanes = draw(st.integers(1, 3))
    ego = VehicleState("ego", 0.0, draw(st.integers(0, lanes - 1)),
                       draw(st.floats(5, 35, **finite)), role=Role.EGO)
    cars = [ego]
    for i in range(draw(st.integers(0, 4))):
        cars.append(VehicleState(f"c{i}", draw(st.floats(-80, 150, **finite)),
                                 draw(st.integers(0, lanes - 1)),
                                 draw(st.floats(0, 35, **finite)),
                                 draw(st.floats(-2, 2, **finite))))
    return Scenario(tuple(cars), 0.25, 4.0, 10.0, 1.0, lane_count=lanes)


@settings(max_examples=60, deadline=None)
@given(sc=traffic(), kin=st.sampled_from(["original", "approximated"]))
def test_planner_safety_and_shape(sc, kin):
    ego = sc.ego
    others = constant_lane_predictions(sc.vehicles[1:], kin, sc.horizon, sc.dt)
    d, tr = plan_maneuver(ego, others, sc)
    assert tr.t[0] == 0.0 and tr.x[0] == ego.x and tr.lane[0] == ego.lane and tr.v[0] == ego.v
    assert np.all(np.diff(tr.t) > 0)
    assert set(tr.lane.tolist()) <= {ego.lane, d.target_lane}
    assert 0.0 <= d.t_start <= sc.horizon
    if d.kind is KEEP:
        assert d.target_lane == ego.lane
    if d.emergency:
        return
    # Independent gap check: every vehicle sharing a lane keeps the minimum gap.
    win = tr.secondary_lanes(sc.dt, sc.planner.window)
    for o in others.values():
        owin = o.secondary_lanes(sc.dt, sc.planner.window)
        for k in range(len(tr.t)):
            mine = {int(tr.lane[k]), int(win[k])} - {-1}
            theirs = {int(o.lane[k]), int(owin[k])} - {-1}
            if mine & theirs:
                assert abs(o.x[k] - tr.x[k]) >= sc.planner.min_gap - 1e-9


@settings(max_examples=30, deadline=None)
@given(sc=traffic())
def test_planner_deterministic(sc):
    others = constant_lane_predictions(sc.vehicles[1:], "original", sc.horizon, sc.dt)
    d1, t1 = plan_maneuver(sc.ego, others, sc)
    d2, t2 = plan_maneuver(sc.ego, dict(reversed(list(others.items()))), sc)
    assert d1 == d2 and np.array_equal(t1.x, t2.x)


def test_blinker_right_targets_higher_lane():
    cars = (VehicleState("ego", -60.0, 0, 30.0, role=Role.EGO),
            VehicleState("mc", 0.0, 0, 25.0, blinker=Blinker.RIGHT),)
    sc = Scenario(cars, 0.25, 4.0, 10.0, 1.0, lane_count=2)
    mc = predict_detailed(sc)["mc"]
    assert mc.maneuvers[0].kind is ManeuverKind.CHANGE_RIGHT
    assert mc.lane[-1] == 1


def test_scenario_replace_keeps_desired_speed():
    sc = fig3(planner=PlannerConfig(desired_speed=33.0))
    assert sc.desired_speed(sc.ego) == 33.0
    moved = sc.with_vehicles([dataclasses.replace(sc.ego, v=10.0)] + list(sc.vehicles[1:]))
    assert moved.desired_speed(moved.ego) == 33.0
