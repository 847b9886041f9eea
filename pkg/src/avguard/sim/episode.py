"""Discrete-time virtual CAN bus episode loop.

Each tick: sensors publish, app handlers run in app-list order, app commands
pass through the guardian in publish order, the last surviving command of
each kind sets its actuator, then the ego and the lead vehicle advance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .. import bus
from ..errors import ConfigInvalid
from ..ir.interpreter import DEFAULT_FUEL, AppFault, AppState, execute_handler
from ..watchdog import Context, Decline, LeadReport, Override, Pass, Watchdog, WatchdogConfig
from .dynamics import DEFAULT_DYNAMICS, DynamicsParams, VehicleState, step_dynamics
from .scenario import CAR_FOLLOWING, PATH, PathTracker, Scenario

DELIVERED = "delivered"
DECLINED = "declined"
OVERRIDDEN = "overridden"

AT_REST_STOP = 2.0  # s with both vehicles stopped before an episode ends early


@dataclass
class EpisodeConfig:
    scenario: Scenario
    apps: list = field(default_factory=list)  # AppPackage or AppProgram, in run order
    dt: float = 0.05
    max_steps: int | None = None  # default: scenario duration / dt
    watchdog_enabled: bool = True
    seed: int = 0
    record: bool = True
    fuel: int = DEFAULT_FUEL
    dynamics: DynamicsParams = DEFAULT_DYNAMICS
    watchdog: WatchdogConfig = field(default_factory=WatchdogConfig)

    def steps(self) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return int(round(self.scenario.duration / self.dt))

    def validate(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigInvalid("dt must be positive")
        if self.steps() <= 0:
            raise ConfigInvalid("max_steps must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must be a 64-bit unsigned integer")
        ids = [_program(a).app_id for a in self.apps]
        if len(set(ids)) != len(ids):
            raise ConfigInvalid("duplicate app ids in episode")
        self.scenario.validate()


@dataclass(frozen=True)
class TrajectoryRow:
    t: float
    x: float
    y: float
    heading: float
    speed: float
    yaw_rate: float
    steering: float
    throttle: float
    brake: float
    gap: float
    intervention: int = 0


@dataclass(frozen=True)
class Intervention:
    time: float
    action: str  # override | decline | failsafe
    command: str
    app_id: str = ""


@dataclass(frozen=True)
class FaultRecord:
    time: float
    app_id: str
    fault: AppFault


@dataclass
class EpisodeResult:
    crashed: bool = False
    crash_time: float | None = None
    min_gap: float = math.inf
    min_ttc: float = math.inf
    max_cross_track_error: float = 0.0
    trajectory: list[TrajectoryRow] = field(default_factory=list)
    interventions: list[Intervention] = field(default_factory=list)
    app_faults: list[FaultRecord] = field(default_factory=list)
    netsends: list[bus.NetSendRecord] = field(default_factory=list)
    loss_of_control: bool = False
    off_road: bool = False
    lockout_time: float | None = None
    steps: int = 0
    lane_half_width: float = 1.75

    @property
    def severity(self) -> float:
        """Continuous crash proximity, <= 0 exactly when the episode crashed.

        Car following uses the minimum gap; path following the remaining
        lane margin (only a departure under loss of control is a crash)."""
        if self.crashed:
            return min(self.min_gap, self.lane_half_width - self.max_cross_track_error, 0.0)
        if math.isfinite(self.min_gap):
            return max(self.min_gap, 1e-9)
        return max(self.lane_half_width - self.max_cross_track_error, 1e-9)


@dataclass(frozen=True)
class RoutingOutcome:
    status: str
    recipients: tuple[str, ...] = ()
    replacement: tuple[bus.BusMessage, ...] = ()


def _program(app):
    return getattr(app, "program", app)


def route_message(msg: bus.BusMessage, sender: str, watchdog: Watchdog | None = None,
                  ctx: Context | None = None, subscribers=()) -> RoutingOutcome:
    """Deliver a sensor message to its subscribers or pass a command through
    the guardian."""
    if not bus.is_command(msg.kind):
        return RoutingOutcome(DELIVERED, tuple(subscribers))
    if watchdog is None or ctx is None:
        return RoutingOutcome(DELIVERED, ("vehicle",))
    decision = watchdog.filter(msg, ctx)
    if isinstance(decision, Decline):
        return RoutingOutcome(DECLINED)
    if isinstance(decision, Override):
        return RoutingOutcome(OVERRIDDEN, ("vehicle",), decision.replacement)
    return RoutingOutcome(DELIVERED, ("vehicle",))


def _apply(ego: VehicleState, acts: dict) -> VehicleState:
    kw = {}
    if bus.STEERING_CMD in acts:
        kw["steering"] = acts[bus.STEERING_CMD]["angle"]
    if bus.THROTTLE_CMD in acts:
        kw["throttle"] = acts[bus.THROTTLE_CMD]["percent"]
    if bus.BRAKE_CMD in acts:
        kw["brake"] = acts[bus.BRAKE_CMD]["percent"]
    if bus.GEAR_CMD in acts:
        kw["gear"] = acts[bus.GEAR_CMD]["gear"]
    if bus.ENGINE_CMD in acts:
        kw["engine_on"] = acts[bus.ENGINE_CMD]["on"]
    return ego.with_actuators(**kw) if kw else ego


def run_episode(cfg: EpisodeConfig) -> EpisodeResult:
    cfg.validate()
    sc = cfg.scenario
    dt = cfg.dt
    programs = [_program(a) for a in cfg.apps]
    states = [AppState.initial(p) for p in programs]
    subscribers = {k: tuple(p.app_id for p in programs if k in p.handlers) for k in bus.SENSOR_KINDS}
    wd = Watchdog(cfg.watchdog) if cfg.watchdog_enabled else None

    if sc.kind == PATH:
        w0 = sc.path[0]
        ego = VehicleState(x=w0.x, y=w0.y, heading=w0.heading, speed=sc.ego_speed)
        tracker = PathTracker(sc.path)
    else:
        ego = VehicleState(speed=sc.ego_speed)
        tracker = None
    lead = sc.lead

    res = EpisodeResult(lane_half_width=sc.lane_half_width)
    rows = res.trajectory

    def gap_at(t, x):
        return lead.gap + lead.travelled(t) - x if lead is not None else math.inf

    def cross_track(e):
        if tracker is not None:
            return tracker.cross_track(e.x, e.y)
        return abs(e.y), False

    gap = gap_at(0.0, ego.x)
    res.min_gap = gap
    if cfg.record:
        rows.append(TrajectoryRow(0.0, ego.x, ego.y, ego.heading, ego.speed, ego.yaw_rate,
                                  ego.steering, ego.throttle, ego.brake, gap, 0))
    at_rest = 0.0
    n_steps = cfg.steps()
    for k in range(n_steps):
        t = k * dt
        lead_speed = lead.speed_at(t) if lead is not None else 0.0

        sensors = [ego.report()]
        if lead is not None:
            sensors.append(bus.BusMessage(bus.LEAD_VEHICLE_REPORT, {"gap": gap, "lead_speed": lead_speed}, "vehicle"))
        if sc.signal is not None:
            state = bus.SIGNALS[sc.signal.state_at(t)]
            sensors.append(bus.BusMessage(bus.TRAFFIC_SIGNAL, {"state": state}, "vehicle"))

        published: list[bus.BusMessage] = []
        for i, p in enumerate(programs):
            for msg in sensors:
                if p.app_id not in subscribers[msg.kind]:
                    continue
                out = execute_handler(p, states[i], msg, cfg.fuel, t)
                if out.fault is not None:
                    res.app_faults.append(FaultRecord(t, p.app_id, out.fault))
                    continue
                states[i] = out.state
                published.extend(out.publishes)
                res.netsends.extend(out.netsends)

        acted = 0
        acts: dict[str, bus.BusMessage] = {}
        if wd is None:
            for cmd in published:
                acts[cmd.kind] = cmd
        else:
            ctx = Context(ego, LeadReport(gap, lead_speed) if lead is not None else None, t)
            was_intervening = wd.intervening
            overridden = False
            for cmd in published:
                out = route_message(cmd, cmd.sender, wd, ctx)
                if out.status == DELIVERED:
                    acts[cmd.kind] = cmd
                elif out.status == DECLINED:
                    acted = 1
                    res.interventions.append(Intervention(t, "decline", cmd.describe(), cmd.sender))
                else:
                    acted, overridden = 1, True
                    acts = {r.kind: r for r in out.replacement}
                    res.interventions.append(Intervention(t, "override", cmd.describe(), cmd.sender))
            if not wd.intervening:
                prospective = _apply(ego, acts)
                hold_ctx = Context(prospective, ctx.lead, t)
                decision = wd.check_hold(hold_ctx)
                if isinstance(decision, Override):
                    acted, overridden = 1, True
                    acts = {r.kind: r for r in decision.replacement}
                    res.interventions.append(Intervention(t, "override", "held actuators", ""))
            if wd.intervening and not overridden and was_intervening:
                for cmd in wd.tick(ego):
                    acts[cmd.kind] = cmd
                acted = 1
                res.interventions.append(Intervention(t, "failsafe", "; ".join(c.describe() for c in acts.values())))
            if overridden and res.lockout_time is None:
                res.lockout_time = t
                ego = ego.with_actuators(throttle=0.0)  # emergency stop releases the throttle

        ego = _apply(ego, acts)
        ego = step_dynamics(ego, dt, cfg.dynamics)
        t1 = (k + 1) * dt
        gap = gap_at(t1, ego.x)
        cte, path_done = cross_track(ego)
        res.steps = k + 1

        if gap < res.min_gap:
            res.min_gap = gap
        if lead is not None:
            closing = ego.speed - lead.speed_at(t1)
            if closing > 0:
                ttc = max(gap, 0.0) / closing
                if ttc < res.min_ttc:
                    res.min_ttc = ttc
        if cte > res.max_cross_track_error:
            res.max_cross_track_error = cte
        if cte > sc.lane_half_width:
            res.off_road = True
        res.loss_of_control = ego.loss_of_control
        if cfg.record:
            rows.append(TrajectoryRow(t1, ego.x, ego.y, ego.heading, ego.speed, ego.yaw_rate,
                                      ego.steering, ego.throttle, ego.brake, gap, acted))

        if gap <= 0.0 or (ego.loss_of_control and res.off_road):
            res.crashed = True
            res.crash_time = t1
            break
        if path_done:
            break
        if ego.speed == 0.0 and (lead is None or lead.speed_at(t1) == 0.0):
            at_rest += dt
            if at_rest >= AT_REST_STOP - 1e-9:
                break
        else:
            at_rest = 0.0
    return res
