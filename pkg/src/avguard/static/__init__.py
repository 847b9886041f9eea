"""Static vetting of app packages."""

from .taint import LOCATION_SOURCES, TaintFlow, taint_analysis
from .temporal import (
    RuleAutomaton,
    builtin_rules,
    check_temporal_rule,
    load_rule,
    parse_rule,
)
from .usage import ResourceUsage, check_manifest_consistency, collect_resource_usage
from .vetting import StaticReport, privacy_findings, run_static_vetting

__all__ = [
    "LOCATION_SOURCES", "ResourceUsage", "RuleAutomaton", "StaticReport", "TaintFlow",
    "builtin_rules", "check_manifest_consistency", "check_temporal_rule",
    "collect_resource_usage", "load_rule", "parse_rule", "privacy_findings",
    "run_static_vetting", "taint_analysis",
]
