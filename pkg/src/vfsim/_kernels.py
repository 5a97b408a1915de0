"""Numeric inner loops of the planner.

Every kernel exists twice: a numba ``@njit`` version and a numpy version with
identical arithmetic order. ``VFSIM_NUMBA=0`` (or a missing numba install)
selects the numpy path at import time; both are importable by name so tests
and the benchmark can compare them in one process.
"""
import os

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

_flag = os.environ.get("VFSIM_NUMBA", "1").strip().lower()
USE_NUMBA = njit is not None and _flag not in ("0", "false", "no", "off")


def kinematic_numpy(x0, v, a, t):
    x = 0.5 * a * t * t + v * t + x0
    vel = v + a * t
    return x, vel


def constant_velocity_numpy(x0, v, t):
    x = v * t + x0
    vel = np.full_like(t, v)
    return x, vel


def _shares_lane(l1, l2, m1, m2, skip):
    # Lanes equal to ``skip`` on the ego side are ignored; -2 ignores none.
    if l1 != skip and (l1 == m1 or (m2 >= 0 and l1 == m2)):
        return True
    if l2 >= 0 and l2 != skip and (l2 == m1 or l2 == m2):
        return True
    return False


def rollout_numpy(x0, v0, v_des, lane0, target, k_start, k_win, n, dt,
                  ox, olane, olane2, ov, headway, min_gap, a_max, b_max):
    """Roll the ego forward on the sample grid and check every safety gap.

    Leaders in any occupied lane bound the speed and must keep the headway
    gap. Followers must stay ``min_gap`` away; the headway gap behind is only
    demanded in a lane the ego is entering, since a vehicle already behind
    it in its starting lane was there regardless of the maneuver. Returns ``(x, v, lane, feasible, deficit)``.
    """
    x = np.empty(n + 1)
    v = np.empty(n + 1)
    lane = np.empty(n + 1, dtype=np.int64)
    feasible = True
    deficit = 0.0
    for k in range(n + 1):
        l1 = lane0 if k <= k_start else target
        l2 = -1
        if target != lane0 and k_start <= k < k_start + k_win:
            l2 = target if k == k_start else lane0
        lane[k] = l1
        if k == 0:
            x[k] = x0
        else:
            x[k] = x[k - 1] + v[k - 1] * dt

        if ox.shape[0]:
            m1 = olane[:, k]
            m2 = olane2[:, k]
            shared = (l1 == m1) | ((m2 >= 0) & (l1 == m2))
            if l2 >= 0:
                shared |= (l2 == m1) | (l2 == m2)
            entering = np.zeros(m1.shape[0], dtype=np.bool_)
            if l1 != lane0:
                entering |= (l1 == m1) | ((m2 >= 0) & (l1 == m2))
            if l2 >= 0 and l2 != lane0:
                entering |= (l2 == m1) | (l2 == m2)
            d = ox[:, k] - x[k]
            ahead = shared & (d >= 0.0)
            behind = shared & (d < 0.0)
            cut_in = entering & (d < 0.0)
        else:
            d = ox[:, k]
            ahead = behind = cut_in = np.zeros(0, dtype=bool)

        if k == 0:
            v[k] = v0
        else:
            vk = min(v_des, v[k - 1] + a_max * dt)
            if ahead.any():
                gap = d[ahead].min()
                vk = min(vk, gap / headway)
            vk = max(vk, v[k - 1] - b_max * dt)
            v[k] = max(vk, 0.0)

        if ahead.any():
            need = max(min_gap, headway * v[k])
            if (d[ahead] < need).any():
                feasible = False
        if behind.any() and (-d[behind] < min_gap).any():
            feasible = False
        if cut_in.any():
            need_b = np.maximum(min_gap, headway * ov[cut_in, k])
            if (-d[cut_in] < need_b).any():
                feasible = False
        if k < n:
            deficit += max(0.0, v_des - v[k]) * dt
    return x, v, lane, feasible, deficit


def _rollout_loops(x0, v0, v_des, lane0, target, k_start, k_win, n, dt,
                   ox, olane, olane2, ov, headway, min_gap, a_max, b_max):
    x = np.empty(n + 1)
    v = np.empty(n + 1)
    lane = np.empty(n + 1, dtype=np.int64)
    feasible = True
    deficit = 0.0
    m = ox.shape[0]
    for k in range(n + 1):
        l1 = lane0 if k <= k_start else target
        l2 = -1
        if target != lane0 and k_start <= k < k_start + k_win:
            l2 = target if k == k_start else lane0
        lane[k] = l1
        if k == 0:
            x[k] = x0
        else:
            x[k] = x[k - 1] + v[k - 1] * dt

        gap = np.inf
        has_leader = False
        for j in range(m):
            if _shares_lane(l1, l2, olane[j, k], olane2[j, k], -2):
                d = ox[j, k] - x[k]
                if d >= 0.0:
                    has_leader = True
                    if d < gap:
                        gap = d

        if k == 0:
            v[k] = v0
        else:
            vk = min(v_des, v[k - 1] + a_max * dt)
            if has_leader:
                vk = min(vk, gap / headway)
            vk = max(vk, v[k - 1] - b_max * dt)
            v[k] = max(vk, 0.0)

        for j in range(m):
            d = ox[j, k] - x[k]
            if d >= 0.0:
                if (_shares_lane(l1, l2, olane[j, k], olane2[j, k], -2)
                        and d < max(min_gap, headway * v[k])):
                    feasible = False
            elif _shares_lane(l1, l2, olane[j, k], olane2[j, k], -2):
                if -d < min_gap:
                    feasible = False
                elif (_shares_lane(l1, l2, olane[j, k], olane2[j, k], lane0)
                      and -d < max(min_gap, headway * ov[j, k])):
                    feasible = False
        if k < n:
            deficit += max(0.0, v_des - v[k]) * dt
    return x, v, lane, feasible, deficit


if njit is not None:
    _shares_lane = njit(cache=True)(_shares_lane)
    rollout_numba = njit(cache=True)(_rollout_loops)

    @njit(cache=True)
    def kinematic_numba(x0, v, a, t):
        x = np.empty_like(t)
        vel = np.empty_like(t)
        for i in range(t.shape[0]):
            x[i] = 0.5 * a * t[i] * t[i] + v * t[i] + x0
            vel[i] = v + a * t[i]
        return x, vel

    @njit(cache=True)
    def constant_velocity_numba(x0, v, t):
        x = np.empty_like(t)
        vel = np.empty_like(t)
        for i in range(t.shape[0]):
            x[i] = v * t[i] + x0
            vel[i] = v
        return x, vel
else:  # pragma: no cover
    rollout_numba = kinematic_numba = constant_velocity_numba = None


if USE_NUMBA:
    rollout = rollout_numba
    kinematic = kinematic_numba
    constant_velocity = constant_velocity_numba
else:
    rollout = rollout_numpy
    kinematic = kinematic_numpy
    constant_velocity = constant_velocity_numpy
