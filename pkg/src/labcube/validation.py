"""Findings and validation reports shared by every checking operation."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    code: str
    subject: str
    message: str

    def to_dict(self) -> dict:
        return {
            "severity": self.severity.value,
            "code": self.code,
            "subject": self.subject,
            "message": self.message,
        }


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def error(self, code: str, subject: str, message: str) -> None:
        self.findings.append(Finding(Severity.ERROR, code, subject, message))

    def warn(self, code: str, subject: str, message: str) -> None:
        self.findings.append(Finding(Severity.WARNING, code, subject, message))

    def extend(self, other: "ValidationReport") -> None:
        self.findings.extend(other.findings)

    def codes(self) -> set[str]:
        return {f.code for f in self.findings}

    def to_dict(self) -> dict:
        return {"findings": [f.to_dict() for f in self.findings]}
