"""Runtime guardian: a privileged filter between apps and actuators.

The guardian predicts time-to-collision for every app command.  Once the
prediction falls to the threshold it overrides the command with an
emergency stop, then declines every further app command for the rest of the
episode while it brakes to a standstill, holds the lane and finally parks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import bus
from .sim.dynamics import DEFAULT_DYNAMICS, DynamicsParams, VehicleState, commanded_accel

MONITORING = "monitoring"
INTERVENING = "intervening"


@dataclass(frozen=True)
class WatchdogConfig:
    ttc_threshold: float = 1.5  # s, closed: ttc == threshold intervenes
    reaction_time: float = 0.2  # s
    lane_gain: float = 0.3  # rad per m of cross-track error
    heading_gain: float = 1.0  # rad per rad of heading error
    dynamics: DynamicsParams = DEFAULT_DYNAMICS


@dataclass(frozen=True)
class LeadReport:
    gap: float
    lead_speed: float


@dataclass(frozen=True)
class Context:
    ego: VehicleState
    lead: LeadReport | None = None
    time: float = 0.0


@dataclass(frozen=True)
class WatchdogState:
    mode: str = MONITORING
    lockout_since: float | None = None
    last_context: Context | None = None
    lane: tuple[float, float, float] | None = None  # latched (x, y, heading)


@dataclass(frozen=True)
class Pass:
    pass


@dataclass(frozen=True)
class Decline:
    pass


@dataclass(frozen=True)
class Override:
    replacement: tuple[bus.BusMessage, ...]


Decision = Pass | Decline | Override


def predict_collision(ego: VehicleState, lead: LeadReport, pending: bus.BusMessage | None = None,
                      config: WatchdogConfig = WatchdogConfig()) -> float:
    """Time to collision in seconds, ``inf`` when the gap is not closing."""
    closing = ego.speed - lead.lead_speed
    if pending is not None and pending.kind == bus.THROTTLE_CMD:
        a = commanded_accel(ego, config.dynamics, throttle=pending["percent"], brake=0.0)
    elif pending is not None and pending.kind == bus.BRAKE_CMD:
        a = commanded_accel(ego, config.dynamics, throttle=0.0, brake=pending["percent"])
    elif pending is not None:
        a = ego.accel_cmd
    else:
        a = 0.0
    closing += a * config.reaction_time
    if closing <= 0.0:
        return math.inf
    return max(lead.gap, 0.0) / closing


def lane_hold_angle(lane, ego: VehicleState, config: WatchdogConfig = WatchdogConfig()) -> float:
    x0, y0, h0 = lane
    # signed lateral offset from the latched lane line, left positive
    cte = -(ego.x - x0) * math.sin(h0) + (ego.y - y0) * math.cos(h0)
    herr = math.remainder(ego.heading - h0, 2 * math.pi)
    angle = -config.lane_gain * cte - config.heading_gain * herr
    return bus.clamp(angle, -config.dynamics.max_steer, config.dynamics.max_steer)


def emergency_stop(lane, ego: VehicleState, config: WatchdogConfig = WatchdogConfig()):
    return (
        bus.command(bus.BRAKE_CMD, 100.0, "watchdog"),
        bus.command(bus.STEERING_CMD, lane_hold_angle(lane, ego, config), "watchdog"),
    )


def filter_command(cmd: bus.BusMessage, ctx: Context, st: WatchdogState,
                   config: WatchdogConfig = WatchdogConfig()) -> tuple[Decision, WatchdogState]:
    if st.mode == INTERVENING:
        return Decline(), st
    st = WatchdogState(MONITORING, None, ctx, st.lane)
    if ctx.lead is None:
        return Pass(), st
    ttc = predict_collision(ctx.ego, ctx.lead, cmd, config)
    if ttc > config.ttc_threshold:
        return Pass(), st
    lane = (ctx.ego.x, ctx.ego.y, ctx.ego.heading)
    st = WatchdogState(INTERVENING, ctx.time, ctx, lane)
    return Override(emergency_stop(lane, ctx.ego, config)), st


def failsafe_tick(st: WatchdogState, ego: VehicleState,
                  config: WatchdogConfig = WatchdogConfig()) -> tuple[bus.BusMessage, ...]:
    if st.mode != INTERVENING:
        return ()
    if ego.speed > 0.0:
        return emergency_stop(st.lane, ego, config)
    return (bus.command(bus.GEAR_CMD, bus.GEARS["park"], "watchdog"),)


class Watchdog:
    """Stateful wrapper the simulator drives once per tick."""

    def __init__(self, config: WatchdogConfig = WatchdogConfig()):
        self.config = config
        self.state = WatchdogState()

    @property
    def intervening(self) -> bool:
        return self.state.mode == INTERVENING

    def filter(self, cmd: bus.BusMessage, ctx: Context) -> Decision:
        decision, self.state = filter_command(cmd, ctx, self.state, self.config)
        return decision

    def check_hold(self, ctx: Context) -> Decision:
        """Vet the actuator commands currently held on the bus.

        Apps that stop publishing keep their last commands in force, so the
        guardian re-checks them every tick it has seen no command."""
        ego = ctx.ego
        held = bus.command(bus.BRAKE_CMD, ego.brake) if ego.brake > 0 else bus.command(bus.THROTTLE_CMD, ego.throttle)
        return self.filter(held, ctx)

    def tick(self, ego: VehicleState) -> tuple[bus.BusMessage, ...]:
        return failsafe_tick(self.state, ego, self.config)
