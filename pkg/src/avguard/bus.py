"""Message vocabulary of the virtual CAN bus.

Every message is a kind plus a flat payload keyed by field path.  Enum-valued
fields (gear, signal state) travel as float codes so the IR only ever deals
with floats and booleans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

NUM = "num"
BOOL = "bool"

GEARS = {"park": 0.0, "drive": 1.0, "reverse": 2.0, "neutral": 3.0}
SIGNALS = {"red": 0.0, "yellow": 1.0, "green": 2.0}
ENUM_CONSTANTS = {**GEARS, **SIGNALS}
GEAR_NAMES = {v: k for k, v in GEARS.items()}
SIGNAL_NAMES = {v: k for k, v in SIGNALS.items()}

MAX_STEER = 0.6  # rad

VEHICLE_REPORT = "vehicle_report"
LEAD_VEHICLE_REPORT = "lead_vehicle_report"
TRAFFIC_SIGNAL = "traffic_signal"
STEERING_CMD = "steering_cmd"
THROTTLE_CMD = "throttle_cmd"
BRAKE_CMD = "brake_cmd"
GEAR_CMD = "gear_cmd"
ENGINE_CMD = "engine_cmd"

# kind -> {field path: type}
MESSAGE_FIELDS: dict[str, dict[str, str]] = {
    VEHICLE_REPORT: {
        "position.x": NUM,
        "position.y": NUM,
        "position.heading": NUM,
        "speed": NUM,
        "yaw_rate": NUM,
        "gear": NUM,
        "engine_on": BOOL,
    },
    LEAD_VEHICLE_REPORT: {"gap": NUM, "lead_speed": NUM},
    TRAFFIC_SIGNAL: {"state": NUM},
    STEERING_CMD: {"angle": NUM},
    THROTTLE_CMD: {"percent": NUM},
    BRAKE_CMD: {"percent": NUM},
    GEAR_CMD: {"gear": NUM},
    ENGINE_CMD: {"on": BOOL},
}

SENSOR_KINDS = (VEHICLE_REPORT, LEAD_VEHICLE_REPORT, TRAFFIC_SIGNAL)
COMMAND_KINDS = (STEERING_CMD, THROTTLE_CMD, BRAKE_CMD, GEAR_CMD, ENGINE_CMD)

# resource each message kind needs declared in the manifest
KIND_RESOURCE = {
    VEHICLE_REPORT: "vehicle_report",
    LEAD_VEHICLE_REPORT: "lead_vehicle_report",
    TRAFFIC_SIGNAL: "traffic_signal",
    STEERING_CMD: "steering",
    THROTTLE_CMD: "throttle",
    BRAKE_CMD: "brake",
    GEAR_CMD: "gear",
    ENGINE_CMD: "engine",
}
RESOURCE_KIND = {v: k for k, v in KIND_RESOURCE.items()}

LOCATION_FIELDS = ("position.x", "position.y", "position.heading")


def is_command(kind: str) -> bool:
    return kind in COMMAND_KINDS


def clamp(value: float, lo: float, hi: float) -> float:
    if value != value:  # NaN
        return lo if lo > -math.inf else 0.0
    return lo if value < lo else hi if value > hi else value


def _clamp_payload(kind: str, payload: dict) -> dict:
    if kind in (THROTTLE_CMD, BRAKE_CMD):
        payload["percent"] = clamp(float(payload["percent"]), 0.0, 100.0)
    elif kind == STEERING_CMD:
        payload["angle"] = clamp(float(payload["angle"]), -MAX_STEER, MAX_STEER)
    elif kind == GEAR_CMD:
        g = float(payload["gear"])
        payload["gear"] = g if g in GEAR_NAMES else GEARS["neutral"]
    elif kind == ENGINE_CMD:
        payload["on"] = bool(payload["on"])
    return payload


@dataclass(frozen=True)
class BusMessage:
    kind: str
    payload: Mapping[str, float | bool] = field(default_factory=dict)
    sender: str = ""

    def __getitem__(self, key: str):
        return self.payload[key]

    def describe(self) -> str:
        body = ", ".join(f"{k}={_fmt(v)}" for k, v in self.payload.items())
        return f"{self.kind}({body})"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return f"{v:g}"


def message(kind: str, sender: str = "", **payload) -> BusMessage:
    """Build a message, applying the bus clamping rules to command payloads."""
    if kind not in MESSAGE_FIELDS:
        raise ValueError(f"unknown message kind {kind!r}")
    # ``position_x`` style keywords map onto dotted paths
    fixed = {k.replace("__", "."): v for k, v in payload.items()}
    if is_command(kind):
        fixed = _clamp_payload(kind, fixed)
    return BusMessage(kind, fixed, sender)


def from_payload(kind: str, payload: dict, sender: str = "") -> BusMessage:
    """Build a message from a dotted-path payload, clamping command fields."""
    payload = dict(payload)
    if is_command(kind):
        payload = _clamp_payload(kind, payload)
    return BusMessage(kind, payload, sender)


def command(kind: str, value, sender: str = "") -> BusMessage:
    """Single-field command shorthand: ``command(BRAKE_CMD, 100)``."""
    (name,) = MESSAGE_FIELDS[kind]
    return BusMessage(kind, _clamp_payload(kind, {name: value}), sender)


@dataclass(frozen=True)
class NetSendRecord:
    host: str
    values: tuple[float, ...]
    sender: str = ""
    time: float = 0.0


@dataclass(frozen=True)
class StorageRecord:
    key: str
    values: tuple[float, ...]
    sender: str = ""
    time: float = 0.0
