"""Measurement-construct reports, trend tables and run diffs.

Every renderer is a pure function of its inputs. The run timestamp comes
from the run, never from the clock.
"""

from __future__ import annotations

from typing import Sequence

from . import canon
from .engine import (
    AGGREGATION_RULE,
    MeasurementRun,
    MetricResult,
    Status,
    TrendSeries,
    outcome_doc,
    run_doc,
)
from .metric_expr import Value, print_expr
from .plan_model import Goal, MeasurementPlan, Metric, Question

FORMATS = ("markdown", "machine")
NOT_SPECIFIED = "(not specified)"

INTERPRETATION = {
    Status.EXCELLENT: "Meets the excellent target. Keep the current practice.",
    Status.ACCEPTABLE: "Within the acceptable band. Watch for drift towards the acceptable cut.",
    Status.UNACCEPTABLE: "Outside the acceptable band. Apply the corrective action and re-measure next period.",
    Status.UNKNOWN: "No value could be determined. Collect the missing evidence before claiming acceptability.",
}

AGGREGATION_NOTE = (
    "Statuses roll up worst-of: a question takes the lowest status of its metrics and a goal "
    "the lowest status of its questions, ordered Unacceptable < Unknown < Acceptable < Excellent. "
    "This rollup rule is a choice of this tool."
)


class ReportError(ValueError):
    pass


def _or_blank(s: str | None) -> str:
    return s if s and s.strip() else NOT_SPECIFIED


def _check(run: MeasurementRun, plan: MeasurementPlan) -> None:
    if run.plan_id != plan.plan_id:
        raise ReportError(f"run belongs to plan {run.plan_id!r}, not plan {plan.plan_id!r}")
    if [r.metric_id for r in run.results] != [m.metric_id for m in plan.metrics]:
        raise ReportError(
            f"run {run.plan_id}/{run.period} metrics do not match plan {plan.plan_id!r}"
        )


def _owner(plan: MeasurementPlan) -> dict[str, tuple[Goal, Question]]:
    """First question (plan order) that references each metric."""
    owner: dict[str, tuple[Goal, Question]] = {}
    for g, q in plan.questions():
        for ref in q.metric_refs:
            owner.setdefault(ref, (g, q))
    return owner


def _bands(m: Metric) -> dict:
    t = m.targets
    if t is None:
        return {"direction": None, "excellent_at": None, "acceptable_at": None}
    return {"direction": t.direction, "excellent_at": t.excellent_at, "acceptable_at": t.acceptable_at}


def construct_entry(plan: MeasurementPlan, m: Metric, r: MetricResult, goal: Goal, question: Question) -> dict:
    hyp = None
    if m.hypothesis is not None:
        hyp = {
            "relation": m.hypothesis.relation,
            "bound": print_expr(m.hypothesis.bound),
            "bound_value": outcome_doc(r.hypothesis_bound),
            "verdict": r.hypothesis_verdict,
        }
    return {
        "metric_id": m.metric_id,
        "metric_name": _or_blank(m.name),
        "goal_id": goal.goal_id,
        "control_objective": f"{_or_blank(goal.control_ref)} {_or_blank(goal.objective)}",
        "question_id": question.question_id,
        "question_text": _or_blank(question.text),
        "formula": print_expr(m.formula),
        "unit": _or_blank(m.unit),
        "data_sources": list(m.data_sources),
        "collection_frequency": m.collection_frequency or NOT_SPECIFIED,
        "responsible_role": _or_blank(m.responsible_role),
        "audience": _or_blank(m.audience),
        "value": str(r.outcome),
        "target_bands": _bands(m),
        "status": r.status.label,
        "hypothesis": hyp,
        "hypothesis_verdict": r.hypothesis_verdict,
        "interpretation": INTERPRETATION[r.status],
        "corrective_action": _or_blank(m.review_note),
    }


def construct_entries(run: MeasurementRun, plan: MeasurementPlan) -> list[dict]:
    _check(run, plan)
    owner = _owner(plan)
    return [
        construct_entry(plan, m, r, *owner[m.metric_id])
        for m, r in zip(plan.metrics, run.results)
    ]


def _cell(text: str) -> str:
    return text.replace("|", "\\|").replace("\n", " ")


def render_construct(run: MeasurementRun, plan: MeasurementPlan, fmt: str = "markdown") -> str:
    """Render the measurement-construct report for one run."""
    if fmt not in FORMATS:
        raise ReportError(f"unknown format {fmt!r}")
    entries = construct_entries(run, plan)
    if fmt == "machine":
        return canon.dumps({"report": "measurement-construct", "run": run_doc(run), "constructs": entries})

    by_id = {e["metric_id"]: e for e in entries}
    out = [
        f"# Measurement report: {plan.plan_id} ({run.period})",
        "",
        "| Field | Value |",
        "|---|---|",
        f"| Plan | {_cell(plan.plan_id)} |",
        f"| Organization | {_cell(_or_blank(plan.organization))} |",
        f"| Period | {run.period} |",
        f"| Evidence digest | `{run.evidence_digest}` |",
        f"| Run timestamp | {run.run_timestamp} |",
        f"| Aggregation | {AGGREGATION_RULE} |",
        "",
        f"> {AGGREGATION_NOTE}",
        "",
    ]
    rendered: set[str] = set()
    for g in plan.goals:
        _, gstatus = run.goal_statuses[g.goal_id]
        out += [
            f"## Goal {g.goal_id}: {_or_blank(g.control_ref)} ({gstatus.label})",
            "",
            _or_blank(g.objective),
            "",
            f"Business goal: {_or_blank(g.business_goal)}",
            "",
        ]
        for q in g.questions:
            qstatus = run.question_statuses[q.question_id][2]
            out += [f"### Question {q.question_id}: {_or_blank(q.text)} ({qstatus.label})", ""]
            for ref in q.metric_refs:
                e = by_id[ref]
                if ref in rendered:
                    out += [f"#### Metric {ref}: see {e['question_id']} ({e['status']})", ""]
                    continue
                rendered.add(ref)
                out += [f"#### Metric {ref}: {_cell(e['metric_name'])}", ""] + _entry_table(e) + [""]
    return "\n".join(out).rstrip("\n") + "\n"


def _entry_table(e: dict) -> list[str]:
    hyp = e["hypothesis"]
    if hyp is None:
        hyp_text = "none"
    else:
        rel = "<=" if hyp["relation"] == "le" else ">="
        hyp_text = f"value {rel} {hyp['bound']}: {hyp['verdict']}"
    rows = [
        ("Control objective", e["control_objective"]),
        ("Question", f"{e['question_id']}: {e['question_text']}"),
        ("Formula", f"`{e['formula']}`"),
        ("Unit", e["unit"]),
        ("Data sources", ", ".join(e["data_sources"]) or NOT_SPECIFIED),
        ("Collection frequency", e["collection_frequency"]),
        ("Responsible role", e["responsible_role"]),
        ("Audience", e["audience"]),
        ("Value", e["value"]),
        ("Target bands", _bands_from_doc(e["target_bands"])),
        ("Status", e["status"]),
        ("Hypothesis", hyp_text),
        ("Interpretation", e["interpretation"]),
        ("Corrective action", e["corrective_action"]),
    ]
    return ["| Field | Value |", "|---|---|"] + [f"| {k} | {_cell(v)} |" for k, v in rows]


def _bands_from_doc(t: dict) -> str:
    if t["excellent_at"] is None or t["acceptable_at"] is None:
        return NOT_SPECIFIED
    exc, acc = canon.format_number(t["excellent_at"]), canon.format_number(t["acceptable_at"])
    if t["direction"] is None:
        return f"excellent at {exc}, acceptable at {acc} (no direction)"
    cmp = ">=" if t["direction"] == "higher_better" else "<="
    return f"{t['direction']}: Excellent {cmp} {exc}, Acceptable {cmp} {acc}"


def render_trend(series: Sequence[TrendSeries], fmt: str = "markdown", title: str = "Trend report") -> str:
    """One row per metric: its value in each period and the trend assessment."""
    if not series:
        raise ReportError("no trend series to render")
    if fmt not in FORMATS:
        raise ReportError(f"unknown format {fmt!r}")
    if fmt == "machine":
        return canon.dumps(
            {
                "report": "trend",
                "title": title,
                "series": [
                    {
                        "metric_id": s.metric_id,
                        "points": [{"period": p, "outcome": outcome_doc(o)} for p, o in s.points],
                        "assessment": s.assessment,
                    }
                    for s in series
                ],
            }
        )
    periods = sorted({p for s in series for p, _ in s.points})
    out = [
        f"# {title}",
        "",
        "| Metric | " + " | ".join(periods) + " | Assessment |",
        "|---|" + "---|" * len(periods) + "---|",
    ]
    for s in series:
        values = dict(s.points)
        cells = [str(values[p]) if p in values else "-" for p in periods]
        out.append(f"| {s.metric_id} | " + " | ".join(_cell(c) for c in cells) + f" | {s.assessment} |")
    return "\n".join(out) + "\n"


def diff_runs(run_a: MeasurementRun, run_b: MeasurementRun) -> str:
    """List metrics whose status changed between two runs of the same plan."""
    if run_a.plan_id != run_b.plan_id:
        raise ReportError(f"cannot diff runs of different plans: {run_a.plan_id!r} vs {run_b.plan_id!r}")
    b_by_id = {r.metric_id: r for r in run_b.results}
    lines = []
    for a in run_a.results:
        b = b_by_id.get(a.metric_id)
        if b is None or a.status == b.status:
            continue
        line = f"{a.metric_id}: {a.status.label} -> {b.status.label}"
        if isinstance(a.outcome, Value) and isinstance(b.outcome, Value):
            delta = canon.format_number(b.outcome.value - a.outcome.value)
            if not delta.startswith("-"):
                delta = "+" + delta
            line += f" (value {a.outcome} -> {b.outcome}, delta {delta})"
        else:
            line += f" (value {a.outcome} -> {b.outcome})"
        lines.append(line)
    header = f"# Run diff: {run_a.plan_id} {run_a.period} -> {run_b.period}"
    body = lines or ["no changes"]
    return "\n".join([header, ""] + body) + "\n"
