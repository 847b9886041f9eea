"""Seeded example apps, synthetic naturalistic traces and sample scenarios."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from ...evaluation.traces import read_traces
from ..package import load_package

CORPUS_DIR = Path(__file__).resolve().parent
TRACES = CORPUS_DIR / "traces.csv"
MODEL_CONFIG = CORPUS_DIR / "model.json"
SCENARIOS = CORPUS_DIR / "scenarios"
TRACE_SEED = 20170605
TRACE_COUNT = 2400

# expected outcome of the full pipeline for each seeded app
LABELS = {
    "path_follower_corrected": "approved",
    "path_follower_faithful": "rejected_dynamic",
    "aggressive_follower": "rejected_dynamic",
    "infotainment_steering": "rejected_static",
    "privacy_leak": "rejected_static",
    "park_rule_violator": "rejected_static",
    "red_light_violator": "rejected_static",
}


def package_path(name: str) -> Path:
    return CORPUS_DIR / f"{name}.avpkg"


def corpus_package(name: str):
    return load_package(package_path(name))


def corpus_names() -> list[str]:
    return sorted(LABELS)


@lru_cache(maxsize=1)
def _traces():
    return tuple(read_traces(TRACES))


def corpus_traces() -> list:
    return list(_traces())


def regenerate_traces() -> None:
    """Rewrite ``traces.csv`` from ``model.json`` (deterministic)."""
    from ...evaluation.traces import generate_traces, write_traces

    write_traces(generate_traces(MODEL_CONFIG, TRACE_COUNT, TRACE_SEED), TRACES)
