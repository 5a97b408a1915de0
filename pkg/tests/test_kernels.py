import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vfsim import _kernels

needs_numba = pytest.mark.skipif(_kernels.rollout_numba is None, reason="numba not installed")
finite = dict(allow_nan=False, allow_infinity=False)


@st.composite
def rollout_args(draw):
    n = draw(st.integers(1, 30))
    m = draw(st.integers(0, 5))
    lanes = draw(st.integers(1, 4))
    lane0 = draw(st.integers(0, lanes - 1))
    target = draw(st.sampled_from(sorted({max(0, lane0 - 1), lane0, min(lanes - 1, lane0 + 1)})))
    dt = draw(st.sampled_from([0.1, 0.25, 0.5]))
    t = np.arange(n + 1) * dt
    ox = np.empty((m, n + 1))
    ov = np.empty((m, n + 1))
    olane = np.empty((m, n + 1), dtype=np.int64)
    olane2 = np.full((m, n + 1), -1, dtype=np.int64)
    for j in range(m):
        x0 = draw(st.floats(-100, 200, **finite))
        v = draw(st.floats(0, 40, **finite))
        ox[j] = x0 + v * t
        ov[j] = v
        olane[j] = draw(st.integers(0, lanes - 1))
        if draw(st.booleans()):
            k = draw(st.integers(0, n))
            olane2[j, k:k + 3] = draw(st.integers(0, lanes - 1))
    return (draw(st.floats(-10, 10, **finite)), draw(st.floats(0, 40, **finite)),
            draw(st.floats(1, 40, **finite)), lane0, target, draw(st.integers(0, n)),
            draw(st.integers(1, 6)), n, dt, ox, olane, olane2, ov,
            2.0, 5.0, 2.0, 4.0)


@needs_numba
@settings(max_examples=200, deadline=None)
@given(args=rollout_args())
def test_rollout_paths_agree(args):
    x1, v1, l1, f1, d1 = _kernels.rollout_numpy(*args)
    x2, v2, l2, f2, d2 = _kernels.rollout_numba(*args)
    np.testing.assert_allclose(x1, x2, rtol=0, atol=1e-9)
    np.testing.assert_allclose(v1, v2, rtol=0, atol=1e-9)
    assert np.array_equal(l1, l2)
    assert bool(f1) == bool(f2)
    assert d1 == pytest.approx(d2, abs=1e-9)


@needs_numba
@given(x0=st.floats(-1e3, 1e3, **finite), v=st.floats(0, 60, **finite),
       a=st.floats(-5, 5, **finite), n=st.integers(1, 50))
def test_kinematic_paths_bitwise(x0, v, a, n):
    t = np.arange(n + 1) * 0.25
    for py, jit in ((_kernels.kinematic_numpy(x0, v, a, t), _kernels.kinematic_numba(x0, v, a, t)),
                    (_kernels.constant_velocity_numpy(x0, v, t),
                     _kernels.constant_velocity_numba(x0, v, t))):
        assert py[0].tobytes() == jit[0].tobytes()
        assert py[1].tobytes() == jit[1].tobytes()


def test_lane_switch_after_initiation_sample():
    ox = np.empty((0, 9))
    lanes = np.empty((0, 9), dtype=np.int64)
    x, v, lane, ok, deficit = _kernels.rollout(0.0, 10.0, 10.0, 2, 1, 2, 2, 8, 0.5,
                                               ox, lanes, lanes, ox, 2.0, 5.0, 2.0, 4.0)
    assert lane.tolist() == [2, 2, 2, 1, 1, 1, 1, 1, 1]
    assert ok and deficit == 0.0 and x[-1] == 40.0


def test_leader_limits_speed():
    t = np.arange(9) * 0.5
    ox = (30.0 + 5.0 * t)[None, :]
    lanes = np.zeros((1, 9), dtype=np.int64)
    x, v, lane, ok, deficit = _kernels.rollout(0.0, 20.0, 20.0, 0, 0, 0, 2, 8, 0.5, ox, lanes,
                                               lanes - 1, np.full((1, 9), 5.0),
                                               2.0, 5.0, 2.0, 4.0)
    assert v[1] < 20.0 and deficit > 0.0


@pytest.mark.parametrize("flag,expected", [("0", False), ("off", False), ("1", True)])
def test_env_flag_selects_path(flag, expected):
    code = ("from vfsim import _kernels as k; "
            "print(k.USE_NUMBA, k.rollout is k.rollout_numba)")
    env = dict(os.environ, VFSIM_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    has_numba = _kernels.rollout_numba is not None
    assert out == [str(expected and has_numba)] * 2
