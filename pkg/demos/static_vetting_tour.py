"""Walk the seeded corpus through static vetting and show why each app
passes or is rejected."""

from __future__ import annotations

from avguard.pipeline.corpus import LABELS, corpus_names, corpus_package
from avguard.static.vetting import run_static_vetting


def main():
    for name in corpus_names():
        pkg = corpus_package(name)
        report = run_static_vetting(pkg)
        print(f"== {name}: static verdict {report.verdict} (pipeline label {LABELS[name]})")
        for f in report.findings:
            witness = " -> ".join(f.witness) if f.witness else ""
            print(f"   [{f.severity}] {f.rule}: {f.evidence}" + (f"  witness: {witness}" if witness else ""))
        print()


if __name__ == "__main__":
    main()
