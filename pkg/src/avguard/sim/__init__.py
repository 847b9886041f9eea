"""Simulated vehicle: bus, dynamics, scenarios and the episode loop."""

from .dynamics import DEFAULT_DYNAMICS, DynamicsParams, VehicleState, commanded_accel, step_dynamics
from .episode import (
    DECLINED,
    DELIVERED,
    OVERRIDDEN,
    EpisodeConfig,
    EpisodeResult,
    Intervention,
    RoutingOutcome,
    TrajectoryRow,
    route_message,
    run_episode,
)
from .export import TRAJECTORY_HEADER, trajectory_csv, write_trajectory_csv
from .scenario import (
    CAR_FOLLOWING,
    LANE_HALF_WIDTH,
    PATH,
    LeadScript,
    PathTracker,
    Scenario,
    ScenarioParams,
    SignalScript,
    car_following,
    load_scenario,
    path_following,
    scenario_from_dict,
)

__all__ = [
    "CAR_FOLLOWING", "DECLINED", "DEFAULT_DYNAMICS", "DELIVERED", "DynamicsParams",
    "EpisodeConfig", "EpisodeResult", "Intervention", "LANE_HALF_WIDTH", "LeadScript",
    "OVERRIDDEN", "PATH", "PathTracker", "RoutingOutcome", "Scenario", "ScenarioParams",
    "SignalScript", "TRAJECTORY_HEADER", "TrajectoryRow", "VehicleState", "car_following",
    "commanded_accel", "load_scenario", "path_following", "route_message", "run_episode",
    "scenario_from_dict", "step_dynamics", "trajectory_csv", "write_trajectory_csv",
]
