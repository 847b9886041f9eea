"""Naturalistic trace records: CSV I/O, a synthetic generator, model fitting."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigInvalid, DegenerateVariance, EvaluationError, InsufficientData, NoMatchingTraces
from ..manifest import CIRCUMSTANCES
from ..sim.scenario import ScenarioParams
from .distributions import ScenarioModel, TruncatedExponential, TruncatedNormal, Uniform

FIELDS = ScenarioParams.FIELDS
TRACE_HEADER = ("circumstance",) + FIELDS
MIN_RECORDS = 30
MAX_DECEL = 12.0

# truncation bounds used when fitting; physical limits for a passenger car
DEFAULT_BOUNDS = {
    "initial_gap": (0.5, 150.0),
    "ego_speed": (0.5, 45.0),
    "lead_speed": (0.5, 45.0),
    "lead_decel": (0.0, MAX_DECEL),
    "decel_onset": (0.0, 5.0),
}


@dataclass(frozen=True)
class TraceRecord:
    circumstance: str
    initial_gap: float
    ego_speed: float
    lead_speed: float
    lead_decel: float
    decel_onset: float

    @property
    def params(self) -> ScenarioParams:
        return ScenarioParams(self.initial_gap, self.ego_speed, self.lead_speed, self.lead_decel, self.decel_onset)

    def values(self) -> tuple[float, ...]:
        return self.params.as_tuple()


def read_traces(source) -> list[TraceRecord]:
    """Read a trace CSV from a path or from its text."""
    if isinstance(source, (str, Path)) and "\n" not in str(source):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise EvaluationError(f"cannot read traces {source}: {exc}") from exc
    else:
        text = str(source)
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != TRACE_HEADER:
        raise EvaluationError(f"trace header must be {','.join(TRACE_HEADER)}")
    out = []
    for i, row in enumerate(reader, start=2):
        try:
            vals = [float(row[f]) for f in FIELDS]
        except (TypeError, ValueError) as exc:
            raise EvaluationError(f"line {i}: {exc}") from exc
        out.append(TraceRecord(row["circumstance"].strip(), *vals))
    return out


def traces_csv(records) -> str:
    lines = [",".join(TRACE_HEADER)]
    for r in records:
        lines.append(",".join([r.circumstance] + [repr(float(v)) for v in r.values()]))
    return "\n".join(lines) + "\n"


def write_traces(records, path) -> None:
    Path(path).write_text(traces_csv(records))


def select_traces(records, circumstances) -> list[TraceRecord]:
    """Records recorded under any of ``circumstances``; ``any`` matches all."""
    tags = set(circumstances)
    if "any" in tags:
        chosen = list(records)
    else:
        chosen = [r for r in records if r.circumstance in tags]
    if not chosen:
        raise NoMatchingTraces(f"no traces recorded under {', '.join(sorted(tags)) or 'no circumstance'}")
    return chosen


def check_physical(records, bounds=None) -> None:
    bounds = {**DEFAULT_BOUNDS, **(bounds or {})}
    for k, r in enumerate(records):
        for name, v in zip(FIELDS, r.values()):
            lo, hi = bounds[name]
            if not (math.isfinite(v) and lo <= v <= hi):
                raise EvaluationError(f"record {k}: {name}={v} outside [{lo}, {hi}]")


def fit_model(records, bounds=None) -> ScenarioModel:
    """Per-field maximum-likelihood fit.

    Gap and speeds: truncated normals with the plain sample mean and standard
    deviation (no correction for the truncation).  Deceleration: truncated
    exponential with rate 1/mean.  Onset: uniform over the configured window.
    """
    records = list(records)
    if len(records) < MIN_RECORDS:
        raise InsufficientData(f"need at least {MIN_RECORDS} records, got {len(records)}")
    bounds = {**DEFAULT_BOUNDS, **(bounds or {})}
    check_physical(records, bounds)
    data = np.array([r.values() for r in records], dtype=float)
    dists = []
    for j, name in enumerate(FIELDS):
        col = data[:, j]
        lo, hi = bounds[name]
        if name == "lead_decel":
            mean = float(col.mean())
            if mean <= 0:
                raise DegenerateVariance("lead_decel: all values are zero")
            dists.append(TruncatedExponential(1.0 / mean, lo, hi))
        elif name == "decel_onset":
            dists.append(Uniform(lo, hi))
        else:
            sd = float(col.std(ddof=1))
            if sd == 0.0:
                raise DegenerateVariance(f"{name}: all {len(col)} values equal {col[0]}")
            dists.append(TruncatedNormal(float(col.mean()), sd, lo, hi))
    model = ScenarioModel(FIELDS, tuple(dists))
    model.validate_nominal()
    return model


# ---------------------------------------------------------------- generator

def load_model_config(path_or_dict) -> dict:
    """Ground-truth generator configuration.

    ``{"circumstances": {"highway": {"weight": 1, "model": {<field>: {...}}}}}``
    where each field maps to a distribution description such as
    ``{"dist": "truncnorm", "mu": 30, "sigma": 8, "lo": 0.5, "hi": 150}``.
    """
    if isinstance(path_or_dict, dict):
        cfg = path_or_dict
    else:
        try:
            cfg = json.loads(Path(path_or_dict).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigInvalid(f"cannot read model config {path_or_dict}: {exc}") from exc
    circ = cfg.get("circumstances")
    if not isinstance(circ, dict) or not circ:
        raise ConfigInvalid("model config needs a non-empty 'circumstances' table")
    for tag, entry in circ.items():
        if tag not in CIRCUMSTANCES or tag == "any":
            raise ConfigInvalid(f"unknown circumstance {tag!r}")
        if set(entry.get("model", {})) != set(FIELDS):
            raise ConfigInvalid(f"{tag}: model must describe exactly {', '.join(FIELDS)}")
    return cfg


def generate_traces(config, n: int, seed: int) -> list[TraceRecord]:
    """Draw ``n`` synthetic records, split across circumstances by weight."""
    cfg = load_model_config(config)
    if n < 1:
        raise ConfigInvalid("n must be positive")
    rng = np.random.default_rng(seed)
    tags = sorted(cfg["circumstances"])
    weights = np.array([float(cfg["circumstances"][t].get("weight", 1.0)) for t in tags])
    if np.any(weights <= 0):
        raise ConfigInvalid("circumstance weights must be positive")
    counts = rng.multinomial(n, weights / weights.sum())
    out: list[TraceRecord] = []
    for tag, k in zip(tags, counts):
        spec = cfg["circumstances"][tag]["model"]
        model = ScenarioModel.from_dict({f: spec[f] for f in FIELDS})
        X = model.sample(rng, int(k))
        out.extend(TraceRecord(tag, *map(float, row)) for row in X)
    return out
