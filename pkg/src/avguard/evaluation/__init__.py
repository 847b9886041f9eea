"""Accelerated evaluation: scenario models, importance sampling, cross-entropy search."""

from .cross_entropy import NoEliteProgress, Proposal, cross_entropy_search
from .distributions import DiscreteGridModel, ScenarioModel, TruncatedExponential, TruncatedNormal, Uniform
from .dynamic import CrashIndicator, DynamicConfig, DynamicReport, run_dynamic_vetting, scenario_family
from .estimators import (
    Estimate,
    acceleration_factor,
    crude_mc_estimate,
    estimate_from_terms,
    is_estimate,
    required_samples,
)
from .indicators import AboveThreshold, BelowThreshold, Constant, FunctionIndicator, Indicator
from .traces import (
    DEFAULT_BOUNDS,
    TRACE_HEADER,
    TraceRecord,
    fit_model,
    generate_traces,
    read_traces,
    select_traces,
    traces_csv,
    write_traces,
)

__all__ = [
    "AboveThreshold", "BelowThreshold", "Constant", "CrashIndicator", "DEFAULT_BOUNDS", "DiscreteGridModel",
    "DynamicConfig", "DynamicReport", "Estimate", "FunctionIndicator", "Indicator", "NoEliteProgress",
    "Proposal", "ScenarioModel", "TRACE_HEADER", "TraceRecord", "TruncatedExponential", "TruncatedNormal",
    "Uniform", "acceleration_factor", "crude_mc_estimate", "cross_entropy_search", "estimate_from_terms",
    "fit_model", "generate_traces", "is_estimate", "read_traces", "required_samples", "run_dynamic_vetting",
    "scenario_family", "select_traces", "traces_csv", "write_traces",
]
