"""Mergeable verification reports shared by the structure/estimate checkers."""

from __future__ import annotations

from dataclasses import dataclass, field

_MAX_DETAILS = 20


@dataclass
class VerificationReport:
    """Outcome of checking one inequality family over a sample sweep.

    A sample is *checked* when its hypothesis side holds, *skipped*
    otherwise; a checked sample with margin < -tolerance is a violation.
    Margins are signed (conclusion slack; negative means violated) and the
    worst one is kept even when it is negative.  Reports merge
    associatively so sweeps may be partitioned across workers.
    """

    name: str
    tolerance: float
    n_checked: int = 0
    n_skipped: int = 0
    n_violations: int = 0
    worst_margin: float = float("inf")
    details: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.n_violations == 0

    def record(self, margin, detail=None):
        self.n_checked += 1
        if margin < self.worst_margin:
            self.worst_margin = float(margin)
        if margin < -self.tolerance:
            self.n_violations += 1
            if detail is not None and len(self.details) < _MAX_DETAILS:
                self.details.append(detail)

    def skip(self):
        self.n_skipped += 1

    def merge(self, other):
        if other.name != self.name:
            raise ValueError("cannot merge reports with different names")
        out = VerificationReport(self.name, min(self.tolerance, other.tolerance))
        out.n_checked = self.n_checked + other.n_checked
        out.n_skipped = self.n_skipped + other.n_skipped
        out.n_violations = self.n_violations + other.n_violations
        out.worst_margin = min(self.worst_margin, other.worst_margin)
        out.details = (self.details + other.details)[:_MAX_DETAILS]
        out.constants = {**self.constants, **other.constants}
        return out

    def to_dict(self):
        return {
            "name": self.name,
            "tolerance": self.tolerance,
            "checked": self.n_checked,
            "skipped": self.n_skipped,
            "violations": self.n_violations,
            "worst_margin": self.worst_margin if self.n_checked else None,
            "passed": self.passed,
            "constants": dict(self.constants),
            "details": list(self.details),
        }

    def summary(self):
        status = "pass" if self.passed else "FAIL"
        worst = "n/a" if self.n_checked == 0 else f"{self.worst_margin:.3e}"
        return (
            f"[{status}] {self.name}: checked={self.n_checked} "
            f"skipped={self.n_skipped} violations={self.n_violations} "
            f"worst_margin={worst}"
        )
