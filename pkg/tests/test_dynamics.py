from __future__ import annotations

import math

import numpy as np
import pytest

from avguard.sim.dynamics import DEFAULT_DYNAMICS, DynamicsParams, VehicleState, commanded_accel, step_dynamics


def _fit_circle(xs, ys):
    """Algebraic least-squares circle: x^2 + y^2 + D x + E y + F = 0."""
    A = np.column_stack([xs, ys, np.ones_like(xs)])
    b = -(xs**2 + ys**2)
    D, E, F = np.linalg.lstsq(A, b, rcond=None)[0]
    cx, cy = -D / 2, -E / 2
    return math.sqrt(cx * cx + cy * cy - F), (cx, cy)


def test_circular_motion_radius():
    delta, v, dt = 0.1, 5.0, 0.01
    p = DEFAULT_DYNAMICS
    # throttle that exactly cancels drag keeps the speed constant
    s = VehicleState(speed=v, steering=delta, throttle=p.drag * v / p.k_throttle)
    xs, ys = [s.x], [s.y]
    for _ in range(1000):
        s = step_dynamics(s, dt)
        xs.append(s.x)
        ys.append(s.y)
    assert s.speed == pytest.approx(v, abs=1e-9)
    assert not s.loss_of_control
    radius, _ = _fit_circle(np.array(xs), np.array(ys))
    oracle = p.wheelbase / math.tan(delta)
    assert oracle == pytest.approx(28.40, abs=0.01)
    assert abs(radius - oracle) / oracle < 0.01


def test_straight_line_step():
    s = step_dynamics(VehicleState(speed=10.0), 0.1)
    assert s.x == 1.0
    assert s.y == 0.0
    assert s.heading == 0.0
    assert s.speed == pytest.approx(9.99, abs=1e-12)
    assert s.yaw_rate == 0.0


def test_straight_line_at_heading():
    h = 0.7
    s = step_dynamics(VehicleState(speed=10.0, heading=h), 0.1)
    assert s.x == pytest.approx(math.cos(h), abs=1e-15)
    assert s.y == pytest.approx(math.sin(h), abs=1e-15)
    assert s.heading == h


def test_rest_is_a_fixed_point():
    s0 = VehicleState(x=3.0, y=-2.0, heading=0.4)
    s = s0
    for _ in range(100):
        s = step_dynamics(s, 0.05)
    assert s == s0


def test_brake_never_reverses():
    s = VehicleState(speed=0.3, brake=100.0)
    for _ in range(10):
        s = step_dynamics(s, 0.1)
    assert s.speed == 0.0


def test_full_stop_distance_and_time():
    # constant-deceleration oracle: v^2 / (2a) = 20 m and v / a = 2 s from 20 m/s
    params = DynamicsParams(drag=0.0)
    dt = 1e-3
    s = VehicleState(speed=20.0, brake=100.0)
    assert commanded_accel(s, params) == -10.0
    t = 0.0
    while s.speed > 0.0:
        s = step_dynamics(s, dt, params)
        t += dt
    assert t == pytest.approx(2.0, abs=2 * dt)
    assert s.x == pytest.approx(20.0, abs=20.0 * dt)


def test_lateral_saturation_latches_loss_of_control():
    p = DEFAULT_DYNAMICS
    s = VehicleState(speed=20.0, steering=0.6)
    s = step_dynamics(s, 0.05)
    assert s.loss_of_control
    assert abs(s.yaw_rate * 20.0) == pytest.approx(p.a_lat_max)
    s = step_dynamics(s.with_actuators(steering=0.0), 0.05)
    assert s.loss_of_control  # latched
    assert s.yaw_rate == 0.0


def test_below_saturation_keeps_control():
    s = step_dynamics(VehicleState(speed=5.0, steering=0.3), 0.05)
    assert not s.loss_of_control
    assert s.yaw_rate == pytest.approx(5.0 / 2.85 * math.tan(0.3))


def test_steering_is_clamped():
    s = step_dynamics(VehicleState(speed=1.0, steering=2.0), 0.05)
    assert s.steering == DEFAULT_DYNAMICS.max_steer


def test_engine_off_or_park_ignores_throttle():
    for s in (VehicleState(speed=5.0, throttle=100.0, engine_on=False),
              VehicleState(speed=5.0, throttle=100.0, gear=0.0)):
        assert commanded_accel(s) == pytest.approx(-0.05)
