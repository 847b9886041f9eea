"""End-to-end vetting: static checks, then (on pass) dynamic evaluation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import AVGuardError
from ..evaluation.dynamic import DynamicConfig, run_dynamic_vetting
from ..evaluation.traces import read_traces
from ..findings import REJECT, Finding
from ..static.vetting import PASS, StaticReport, run_static_vetting
from .package import AppPackage, load_package

APPROVED = "approved"
REJECTED_STATIC = "rejected_static"
REJECTED_DYNAMIC = "rejected_dynamic"


@dataclass(frozen=True)
class DynamicSummary:
    """A dynamic report read back from disk: its values and rendered text."""

    values: dict
    text: str

    @property
    def verdict(self) -> str:
        return self.values["verdict"]

    def key_values(self) -> dict:
        return dict(self.values)

    def render(self) -> str:
        return self.text


@dataclass(frozen=True)
class VetReport:
    static: StaticReport
    dynamic: object = None  # DynamicReport or DynamicSummary
    package_hash: str = ""
    version: str = ""

    @property
    def app_id(self) -> str:
        return self.static.app_id

    @property
    def final_verdict(self) -> str:
        if self.static.verdict != PASS:
            return REJECTED_STATIC
        if self.dynamic is None or self.dynamic.verdict != PASS:
            return REJECTED_DYNAMIC
        return APPROVED

    def render(self) -> str:
        parts = [self.static.render()]
        if self.dynamic is not None:
            parts.append(self.dynamic.render())
        parts.append(f"final verdict {self.final_verdict}\n")
        return "".join(parts)

    def to_dict(self) -> dict:
        d = {
            "app_id": self.app_id,
            "version": self.version,
            "package_hash": self.package_hash,
            "final_verdict": self.final_verdict,
            "static": {
                "verdict": self.static.verdict,
                "findings": [
                    {"path": f.path, "rule": f.rule, "severity": f.severity, "evidence": f.evidence,
                     "witness": list(f.witness)}
                    for f in self.static.findings
                ],
            },
        }
        if self.dynamic is not None:
            d["dynamic"] = {"values": self.dynamic.key_values(), "text": self.dynamic.render()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "VetReport":
        try:
            findings = tuple(
                Finding(f["path"], f["rule"], f["severity"], f["evidence"], tuple(f["witness"]))
                for f in d["static"]["findings"]
            )
            static = StaticReport(d["app_id"], findings)
            dyn = d.get("dynamic")
            dynamic = DynamicSummary(dyn["values"], dyn["text"]) if dyn else None
            report = cls(static, dynamic, d.get("package_hash", ""), d.get("version", ""))
        except (KeyError, TypeError) as exc:
            raise AVGuardError(f"not a vetting report: missing {exc}") from exc
        if report.final_verdict != d.get("final_verdict", report.final_verdict):
            raise AVGuardError("vetting report is inconsistent with its recorded verdict")
        return report

    @classmethod
    def load(cls, path) -> "VetReport":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, ValueError) as exc:
            raise AVGuardError(f"cannot read report {path}: {exc}") from exc


def vet_package(path_or_pkg, traces=None, rules=None, dynamic: DynamicConfig | None = None) -> VetReport:
    """Static vetting, then dynamic vetting against ``traces`` (records or a
    CSV path) when the static verdict is pass."""
    pkg = path_or_pkg if isinstance(path_or_pkg, AppPackage) else load_package(path_or_pkg)
    static = run_static_vetting(pkg, rules)
    h = pkg.digest()
    if static.verdict == REJECT:
        return VetReport(static, None, h, pkg.version)
    if traces is None:
        from .corpus import corpus_traces

        traces = corpus_traces()
    elif isinstance(traces, (str, Path)):
        traces = read_traces(traces)
    report = run_dynamic_vetting(pkg, traces, dynamic)
    return VetReport(static, report, h, pkg.version)
