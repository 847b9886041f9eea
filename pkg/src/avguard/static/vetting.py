"""Offline static vetting: fold every check into one report."""

from __future__ import annotations

from dataclasses import dataclass

from ..findings import REJECT, WARN, Finding
from ..ir import validate_program
from ..manifest import Direction, validate_manifest
from .taint import LOCATION_SOURCES, NET_SEND, taint_analysis
from .temporal import builtin_rules, check_temporal_rule
from .usage import check_manifest_consistency

PASS = "pass"


@dataclass(frozen=True)
class StaticReport:
    app_id: str
    findings: tuple[Finding, ...]

    @property
    def verdict(self) -> str:
        return REJECT if any(f.severity == REJECT for f in self.findings) else PASS

    @property
    def rejects(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == REJECT]

    def rules(self) -> set[str]:
        return {f.rule for f in self.findings}

    def render(self) -> str:
        lines = [f"static-report {self.app_id}", f"verdict {self.verdict}"]
        lines += [f.render() for f in self.findings]
        return "\n".join(lines) + "\n"


def privacy_findings(program, manifest) -> list[Finding]:
    out = []
    network_ok = manifest.declares("network", Direction.CONTROL)
    for flow in taint_analysis(program, LOCATION_SOURCES):
        if flow.sink_kind == NET_SEND:
            severity, rule = (WARN, "privacy_flow") if network_ok else (REJECT, "privacy_leak")
        else:
            severity, rule = WARN, "privacy_storage"
        out.append(
            Finding(flow.location, rule, severity, f"{flow.source} reaches {flow.sink}", flow.witness_path)
        )
    return out


def run_static_vetting(pkg, rules=None) -> StaticReport:
    """Run every static check on ``pkg`` (an :class:`AppPackage`)."""
    if rules is None:
        rules = builtin_rules()
    m, p = pkg.manifest, pkg.program
    findings: list[Finding] = []
    findings += validate_manifest(m)
    findings += validate_program(p)
    if m.app_id != p.app_id:
        findings.append(
            Finding("app", "app_id_mismatch", REJECT, f"manifest {m.app_id!r} vs program {p.app_id!r}")
        )
    findings += check_manifest_consistency(p, m)
    findings += privacy_findings(p, m)
    for rule in rules:
        findings += check_temporal_rule(p, rule)
    return StaticReport(m.app_id, tuple(findings))
