"""Kinematic bicycle model with lateral-acceleration saturation."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .. import bus
from ..ir.program import normalize_angle


@dataclass(frozen=True)
class DynamicsParams:
    wheelbase: float = 2.85  # m
    k_throttle: float = 0.04  # m/s^2 per percent
    k_brake: float = 0.1  # m/s^2 per percent
    drag: float = 0.01  # 1/s
    a_lat_max: float = 6.0  # m/s^2
    max_steer: float = bus.MAX_STEER


DEFAULT_DYNAMICS = DynamicsParams()


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    speed: float = 0.0
    yaw_rate: float = 0.0
    gear: float = bus.GEARS["drive"]
    engine_on: bool = True
    steering: float = 0.0
    throttle: float = 0.0
    brake: float = 0.0
    accel_cmd: float = 0.0
    loss_of_control: bool = False

    def with_actuators(self, steering=None, throttle=None, brake=None, gear=None, engine_on=None):
        return VehicleState(
            self.x, self.y, self.heading, self.speed, self.yaw_rate,
            self.gear if gear is None else gear,
            self.engine_on if engine_on is None else engine_on,
            self.steering if steering is None else steering,
            self.throttle if throttle is None else throttle,
            self.brake if brake is None else brake,
            self.accel_cmd, self.loss_of_control,
        )

    def report(self, sender: str = "vehicle") -> bus.BusMessage:
        return bus.BusMessage(
            bus.VEHICLE_REPORT,
            {
                "position.x": self.x,
                "position.y": self.y,
                "position.heading": self.heading,
                "speed": self.speed,
                "yaw_rate": self.yaw_rate,
                "gear": self.gear,
                "engine_on": self.engine_on,
            },
            sender,
        )


def commanded_accel(s: VehicleState, params: DynamicsParams = DEFAULT_DYNAMICS,
                    throttle: float | None = None, brake: float | None = None) -> float:
    throttle = s.throttle if throttle is None else throttle
    brake = s.brake if brake is None else brake
    driving = s.engine_on and s.gear == bus.GEARS["drive"]
    return (params.k_throttle * throttle if driving else 0.0) - params.k_brake * brake - params.drag * s.speed


def step_dynamics(s: VehicleState, dt: float, params: DynamicsParams = DEFAULT_DYNAMICS) -> VehicleState:
    v = s.speed
    delta = max(-params.max_steer, min(params.max_steer, s.steering))
    a = commanded_accel(s, params)

    tan_d = math.tan(delta)
    yaw = v / params.wheelbase * tan_d
    loc = s.loss_of_control
    if abs(yaw * v) > params.a_lat_max:
        # tyres saturate: the car turns no tighter than a_lat_max allows
        yaw = math.copysign(params.a_lat_max / v, yaw)
        loc = True

    heading = s.heading + yaw * dt
    if heading > math.pi or heading <= -math.pi:
        heading = normalize_angle(heading)
    return VehicleState(
        x=s.x + v * math.cos(s.heading) * dt,
        y=s.y + v * math.sin(s.heading) * dt,
        heading=heading,
        speed=max(0.0, v + a * dt),
        yaw_rate=yaw,
        gear=s.gear,
        engine_on=s.engine_on,
        steering=delta,
        throttle=s.throttle,
        brake=s.brake,
        accel_cmd=a,
        loss_of_control=loc,
    )
