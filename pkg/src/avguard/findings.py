from __future__ import annotations

from dataclasses import dataclass, field

REJECT = "reject"
WARN = "warn"


@dataclass(frozen=True, order=True)
class Finding:
    """One vetting observation.

    ``path`` locates the finding (a manifest field path such as
    ``resources[2].purpose`` or an IR location such as
    ``vehicle_report/body``); findings sort by it so reports are stable.
    """

    path: str
    rule: str
    severity: str = REJECT
    evidence: str = ""
    witness: tuple[str, ...] = field(default=())

    def render(self) -> str:
        line = f"{self.severity}\t{self.rule}\t{self.path}\t{self.evidence}"
        if self.witness:
            line += "\twitness=" + " ; ".join(self.witness)
        return line


def sort_findings(findings) -> list[Finding]:
    return sorted(findings)
