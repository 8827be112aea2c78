"""Validation findings and their canonical text rendering."""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import Span

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    severity: str
    code: str
    message: str
    doc: str = ""
    span: Span | None = None

    def sort_key(self):
        s = self.span or Span(0, 0, 0, 0)
        return (self.doc, s.line, s.col, self.code, self.message)

    def render(self) -> str:
        s = self.span or Span(0, 0, 0, 0)
        return f"{self.severity.upper()} {self.code} {self.doc or '-'}:{s.line}:{s.col} {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "findings",
                           tuple(sorted(set(self.findings), key=Finding.sort_key)))

    @property
    def errors(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity == ERROR)

    @property
    def warnings(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity == WARNING)

    @property
    def ok(self) -> bool:
        """True when there are no error findings."""
        return not self.errors

    @property
    def empty(self) -> bool:
        return not self.findings

    def codes(self) -> list[str]:
        return [f.code for f in self.findings]

    def __add__(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(self.findings + other.findings)

    def render(self) -> str:
        return "".join(f.render() + "\n" for f in self.findings)
