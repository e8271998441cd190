"""Effective-security-metric lint: eight rule families, one per criterion a-h.

Criteria e, g and h are warnings because they describe organizational
follow-through that a plan can only hint at; the rest are errors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

from . import canon
from .metric_expr import kinds_used, parameters_used, typecheck
from .plan_model import MeasurementPlan
from .schema import KIND_SCHEMAS

CRITERIA = {
    "a": "Meet security objectives",
    "b": "Quantifiable values",
    "c": "Simple measurement",
    "d": "Comparable result",
    "e": "Corrective action",
    "f": "Targeted audience",
    "g": "Security improvement",
    "h": "Align with business goals",
}

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    criterion: str
    severity: str
    subject: str
    message: str

    def line(self) -> str:
        return f"{self.severity.upper()} criterion={self.criterion} subject={self.subject} {self.message}"


@dataclass(frozen=True)
class CriterionResult:
    criterion: str
    passed: bool
    errors: int
    warnings: int


def _blank(s: str | None) -> bool:
    return s is None or not s.strip()


def _rule_a(plan: MeasurementPlan):
    for g in plan.goals:
        if _blank(g.control_ref):
            yield ERROR, g.goal_id, "goal has no ISO control reference"
        if _blank(g.objective):
            yield ERROR, g.goal_id, "goal has no control objective"
    for m in plan.metrics:
        if m.targets is None or not m.targets.complete:
            yield ERROR, m.metric_id, "metric lacks excellent/acceptable target bands"


def _rule_b(plan: MeasurementPlan):
    for m in plan.metrics:
        if _blank(m.unit):
            yield ERROR, m.metric_id, "metric has no unit of measure"
        for e in typecheck(m.formula, plan.parameters):
            if e.category != "parameter":
                yield ERROR, m.metric_id, f"formula does not typecheck: {e}"


def _rule_c(plan: MeasurementPlan):
    for m in plan.metrics:
        if not m.data_sources:
            yield ERROR, m.metric_id, "metric names no data sources"
        for s in m.data_sources:
            if s not in KIND_SCHEMAS:
                yield ERROR, m.metric_id, f"data source {s!r} is not a known evidence kind"
        for k in kinds_used(m.formula):
            if m.data_sources and k not in m.data_sources and k in KIND_SCHEMAS:
                yield ERROR, m.metric_id, f"formula reads {k!r} which is not a declared data source"
        if m.collection_frequency is None:
            yield ERROR, m.metric_id, "metric has no collection frequency"
        if _blank(m.responsible_role):
            yield ERROR, m.metric_id, "metric names no responsible role"


def _rule_d(plan: MeasurementPlan):
    for m in plan.metrics:
        exprs = [m.formula] + ([m.hypothesis.bound] if m.hypothesis else [])
        for e in exprs:
            for name in parameters_used(e):
                if name not in plan.parameters:
                    yield ERROR, m.metric_id, f"formula uses undefined parameter {name!r}; result not reproducible"


def _rule_e(plan: MeasurementPlan):
    for m in plan.metrics:
        if _blank(m.review_note):
            yield WARNING, m.metric_id, "no corrective action recorded for unacceptable values"
        if m.collection_frequency == "on_event" and not kinds_used(m.formula):
            yield WARNING, m.metric_id, (
                f"on_event metric reads no evidence, so nothing triggers it within a "
                f"{plan.period_policy.granularity} period"
            )


def _rule_f(plan: MeasurementPlan):
    for m in plan.metrics:
        if _blank(m.audience):
            yield ERROR, m.metric_id, "metric names no audience"


def _rule_g(plan: MeasurementPlan):
    for m in plan.metrics:
        if m.targets is None or m.targets.direction is None:
            yield WARNING, m.metric_id, "targets carry no direction; improvement cannot be assessed"


def _rule_h(plan: MeasurementPlan):
    for g in plan.goals:
        if _blank(g.business_goal):
            yield WARNING, g.goal_id, "goal is not linked to a business goal"


RULES = {
    "a": _rule_a,
    "b": _rule_b,
    "c": _rule_c,
    "d": _rule_d,
    "e": _rule_e,
    "f": _rule_f,
    "g": _rule_g,
    "h": _rule_h,
}


def lint_plan(plan: MeasurementPlan) -> list[Finding]:
    """Apply every rule family. Findings come sorted by (criterion, subject)."""
    findings = [
        Finding(crit, sev, subject, msg) for crit, rule in RULES.items() for sev, subject, msg in rule(plan)
    ]
    return sorted(findings, key=lambda f: (f.criterion, f.subject, f.message))


def escalate(findings: Iterable[Finding]) -> list[Finding]:
    """Strict mode: every warning becomes an error."""
    return [replace(f, severity=ERROR) for f in findings]


def criterion_matrix(findings: Iterable[Finding]) -> dict[str, CriterionResult]:
    findings = list(findings)
    out = {}
    for crit in CRITERIA:
        errors = sum(1 for f in findings if f.criterion == crit and f.severity == ERROR)
        warnings = sum(1 for f in findings if f.criterion == crit and f.severity == WARNING)
        out[crit] = CriterionResult(crit, errors == 0, errors, warnings)
    return out


def render_text(findings: list[Finding]) -> str:
    lines = [f.line() for f in findings]
    lines.append("criterion matrix:")
    for crit, res in criterion_matrix(findings).items():
        verdict = "pass" if res.passed else "FAIL"
        lines.append(
            f"  ({crit}) {CRITERIA[crit]:<27} {verdict:<4}  errors={res.errors} warnings={res.warnings}"
        )
    return "\n".join(lines) + "\n"


def findings_doc(findings: list[Finding]) -> str:
    doc = {
        "findings": [
            {"criterion": f.criterion, "severity": f.severity, "subject": f.subject, "message": f.message}
            for f in findings
        ],
        "matrix": {
            crit: {"pass": r.passed, "errors": r.errors, "warnings": r.warnings}
            for crit, r in criterion_matrix(findings).items()
        },
    }
    return canon.dumps(doc)
