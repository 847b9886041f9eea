from __future__ import annotations

from pathlib import Path

TRAJECTORY_HEADER = ("t", "x", "y", "heading", "speed", "yaw_rate", "steering", "throttle", "brake", "gap",
                     "intervention")


def _num(v: float) -> str:
    return repr(float(v)) if v == v and abs(v) != float("inf") else ("inf" if v > 0 else "-inf" if v < 0 else "nan")


def trajectory_csv(rows) -> str:
    lines = [",".join(TRAJECTORY_HEADER)]
    for r in rows:
        vals = [r.t, r.x, r.y, r.heading, r.speed, r.yaw_rate, r.steering, r.throttle, r.brake, r.gap]
        lines.append(",".join(_num(v) for v in vals) + f",{int(r.intervention)}")
    return "\n".join(lines) + "\n"


def write_trajectory_csv(rows, path) -> None:
    Path(path).write_text(trajectory_csv(rows), newline="")
