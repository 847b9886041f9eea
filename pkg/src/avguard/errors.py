"""Exception hierarchy shared by every avguard subsystem."""

from __future__ import annotations


class AVGuardError(Exception):
    """Base class for all avguard errors."""


# manifest
class ManifestError(AVGuardError):
    pass


class MalformedXml(ManifestError):
    pass


class UnknownResource(ManifestError):
    def __init__(self, name: str, line: int | None = None):
        self.name = name
        self.line = line
        where = f" (line {line})" if line else ""
        super().__init__(f"unknown resource {name!r}{where}")


class MissingField(ManifestError):
    def __init__(self, field: str, line: int | None = None):
        self.field = field
        self.line = line
        where = f" (line {line})" if line else ""
        super().__init__(f"missing field {field!r}{where}")


class DuplicateAppId(ManifestError):
    pass


# IR
class IRError(AVGuardError):
    pass


class IRSyntaxError(IRError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


class UnknownMessageKind(IRSyntaxError):
    pass


class UnknownField(IRSyntaxError):
    pass


# simulation
class ConfigInvalid(AVGuardError):
    pass


# evaluation
class EvaluationError(AVGuardError):
    pass


class InsufficientData(EvaluationError):
    pass


class DegenerateVariance(EvaluationError):
    pass


class NonFiniteWeight(EvaluationError):
    def __init__(self, message: str, index: int | None = None, point=None):
        self.index = index
        self.point = point
        super().__init__(message)


class ZeroHits(EvaluationError):
    pass


class NoMatchingTraces(EvaluationError):
    pass


# pipeline
class PackageUnreadable(AVGuardError):
    pass


class NotApproved(AVGuardError):
    pass


class BadSignature(AVGuardError):
    pass


class Tampered(AVGuardError):
    pass


class Conflict(AVGuardError):
    def __init__(self, findings):
        self.findings = list(findings)
        names = ", ".join(f"{f.resource}:{f.apps[0]}/{f.apps[1]}" for f in self.findings)
        super().__init__(f"resource conflicts: {names}")
