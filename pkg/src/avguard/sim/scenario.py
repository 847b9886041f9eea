"""Scripted environments: a lead vehicle, an optional signal, a reference path."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .. import bus
from ..errors import ConfigInvalid
from ..ir.program import Waypoint
from ..ir.syntax import load_path_csv

CAR_FOLLOWING = "car_following"
PATH = "path"
LANE_HALF_WIDTH = 1.75  # m


@dataclass(frozen=True)
class ScenarioParams:
    initial_gap: float
    ego_speed: float
    lead_speed: float
    lead_decel: float
    decel_onset: float

    FIELDS = ("initial_gap", "ego_speed", "lead_speed", "lead_decel", "decel_onset")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.initial_gap, self.ego_speed, self.lead_speed, self.lead_decel, self.decel_onset)

    @classmethod
    def from_sequence(cls, values) -> "ScenarioParams":
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class LeadScript:
    """Lead vehicle cruising at ``speed`` that brakes at ``decel`` from
    ``onset`` seconds until it stops."""

    gap: float
    speed: float
    decel: float = 0.0
    onset: float = math.inf

    def speed_at(self, t: float) -> float:
        if t <= self.onset:
            return self.speed
        return max(0.0, self.speed - self.decel * (t - self.onset))

    def travelled(self, t: float) -> float:
        """Distance covered by time ``t`` (closed form)."""
        if t <= self.onset:
            return self.speed * t
        before = self.speed * self.onset
        tb = t - self.onset
        if self.decel <= 0.0:
            return before + self.speed * tb
        t_stop = self.speed / self.decel
        tb = min(tb, t_stop)
        return before + self.speed * tb - 0.5 * self.decel * tb * tb


@dataclass(frozen=True)
class SignalScript:
    phases: tuple[tuple[float, str], ...]  # (start time, red|yellow|green), sorted

    def state_at(self, t: float) -> str:
        state = self.phases[0][1]
        for start, s in self.phases:
            if t >= start:
                state = s
        return state


@dataclass(frozen=True)
class Scenario:
    kind: str
    ego_speed: float
    duration: float = 20.0
    lead: LeadScript | None = None
    signal: SignalScript | None = None
    path: tuple[Waypoint, ...] | None = None
    lane_half_width: float = LANE_HALF_WIDTH

    def validate(self) -> None:
        if self.kind not in (CAR_FOLLOWING, PATH):
            raise ConfigInvalid(f"unknown scenario type {self.kind!r}")
        if not (self.ego_speed >= 0 and math.isfinite(self.ego_speed)):
            raise ConfigInvalid("ego_speed must be finite and non-negative")
        if self.duration <= 0:
            raise ConfigInvalid("duration must be positive")
        if self.kind == PATH and not self.path:
            raise ConfigInvalid("path scenario needs waypoints")
        if self.lead is not None and self.lead.gap < 0:
            raise ConfigInvalid("lead gap must be non-negative")
        if self.signal is not None:
            for _, s in self.signal.phases:
                if s not in bus.SIGNALS:
                    raise ConfigInvalid(f"unknown signal state {s!r}")


def car_following(params: ScenarioParams, duration: float = 20.0) -> Scenario:
    lead = LeadScript(params.initial_gap, params.lead_speed, params.lead_decel, params.decel_onset)
    return Scenario(CAR_FOLLOWING, params.ego_speed, duration, lead=lead)


def path_following(path, ego_speed: float, duration: float = 40.0) -> Scenario:
    return Scenario(PATH, ego_speed, duration, path=tuple(path))


def load_scenario(path, assets: dict | None = None) -> Scenario:
    """Read a JSON scenario file.

    ``{"type": "car_following", "initial_gap": 30, "ego_speed": 25,
    "lead_speed": 25, "lead_decel": 3, "decel_onset": 2}`` or
    ``{"type": "path", "ego_speed": 12, "path": "map.dat"}``; a path name is
    looked up in ``assets`` first, then relative to the scenario file.
    """
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigInvalid(f"cannot read scenario {path}: {exc}") from exc
    return scenario_from_dict(spec, assets, base=path.parent)


def scenario_from_dict(spec: dict, assets: dict | None = None, base: Path | None = None) -> Scenario:
    kind = spec.get("type", CAR_FOLLOWING)
    duration = float(spec.get("duration", 20.0 if kind == CAR_FOLLOWING else 40.0))
    signal = None
    if "signal" in spec:
        signal = SignalScript(tuple(sorted((float(t), str(s)) for t, s in spec["signal"])))
    try:
        if kind == CAR_FOLLOWING:
            params = ScenarioParams(*(float(spec[f]) for f in ScenarioParams.FIELDS))
            sc = car_following(params, duration)
            sc = Scenario(sc.kind, sc.ego_speed, duration, sc.lead, signal)
        elif kind == PATH:
            name = spec["path"]
            if assets and name in assets:
                rows = load_path_csv(assets[name])
            else:
                rows = load_path_csv((Path(base or ".") / name).read_text())
            sc = Scenario(PATH, float(spec["ego_speed"]), duration, signal=signal, path=rows)
        else:
            raise ConfigInvalid(f"unknown scenario type {kind!r}")
    except KeyError as exc:
        raise ConfigInvalid(f"scenario is missing {exc}") from exc
    except OSError as exc:
        raise ConfigInvalid(str(exc)) from exc
    sc.validate()
    return sc


class PathTracker:
    """Incremental nearest-segment search along a polyline."""

    def __init__(self, path, window: int = 25):
        self.xs = [w.x for w in path]
        self.ys = [w.y for w in path]
        self.n = len(self.xs)
        self.i = 0
        self.window = window

    def cross_track(self, x: float, y: float) -> tuple[float, bool]:
        """Distance to the path and whether the end of the path is passed."""
        xs, ys = self.xs, self.ys
        if self.n == 1:
            return math.hypot(x - xs[0], y - ys[0]), False
        best, best_i, best_t = math.inf, self.i, 0.0
        lo = max(0, self.i - 2)
        hi = min(self.n - 1, self.i + self.window)
        for i in range(lo, hi):
            ax, ay = xs[i], ys[i]
            dx, dy = xs[i + 1] - ax, ys[i + 1] - ay
            seg2 = dx * dx + dy * dy
            t = 0.0 if seg2 == 0 else ((x - ax) * dx + (y - ay) * dy) / seg2
            tc = 0.0 if t < 0 else 1.0 if t > 1 else t
            px, py = ax + tc * dx - x, ay + tc * dy - y
            d = px * px + py * py
            if d < best:
                best, best_i, best_t = d, i, t
        self.i = best_i
        done = best_i == self.n - 2 and best_t > 1.0
        return math.sqrt(best), done
