"""Interpretation: metric values, status bands, hypothesis verdicts, rollup, trends."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Mapping, Sequence

from . import canon
from .evidence import EvidenceStore, format_timestamp, period_bounds
from .metric_expr import EvalContext, EvalOutcome, Undefined, Value, evaluate
from .plan_model import Hypothesis, MeasurementPlan, TargetBands

AGGREGATION_RULE = "worst-of"


class Status(enum.IntEnum):
    """Metric status; the integer order is the rollup order."""

    UNACCEPTABLE = 0
    UNKNOWN = 1
    ACCEPTABLE = 2
    EXCELLENT = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_label(cls, text: str) -> "Status":
        return cls[text.upper()]


VERDICTS = ("supported", "rejected", "indeterminate", "none")
ASSESSMENTS = ("improving", "degrading", "flat", "insufficient_data")


@dataclass(frozen=True)
class MetricResult:
    metric_id: str
    period: str
    outcome: EvalOutcome
    status: Status
    hypothesis_verdict: str = "none"
    hypothesis_bound: EvalOutcome | None = None


@dataclass(frozen=True)
class MeasurementRun:
    plan_id: str
    period: str
    evidence_digest: str
    run_timestamp: str
    results: tuple[MetricResult, ...]
    # question_id -> (goal_id, metric_refs, status), in plan order
    question_statuses: Mapping[str, tuple[str, tuple[str, ...], Status]]
    # goal_id -> (question_ids, status), in plan order
    goal_statuses: Mapping[str, tuple[tuple[str, ...], Status]]

    def result(self, metric_id: str) -> MetricResult:
        for r in self.results:
            if r.metric_id == metric_id:
                return r
        raise KeyError(metric_id)


@dataclass(frozen=True)
class TrendSeries:
    metric_id: str
    points: tuple[tuple[str, EvalOutcome], ...]
    assessment: str


def classify(outcome: EvalOutcome, targets: TargetBands | None) -> Status:
    """Place a value into a status band. Cut points belong to the better band."""
    if not isinstance(outcome, Value) or targets is None:
        return Status.UNKNOWN
    if not targets.complete or targets.direction is None:
        return Status.UNKNOWN
    v = outcome.value
    e, a = Fraction(targets.excellent_at), Fraction(targets.acceptable_at)
    if targets.direction == "higher_better":
        if v >= e:
            return Status.EXCELLENT
        return Status.ACCEPTABLE if v >= a else Status.UNACCEPTABLE
    if v <= e:
        return Status.EXCELLENT
    return Status.ACCEPTABLE if v <= a else Status.UNACCEPTABLE


def aggregate_status(children: Sequence[Status]) -> Status:
    """Worst-of rollup."""
    if not children:
        raise ValueError("cannot aggregate an empty status list")
    return min(children)


def test_hypothesis(outcome: EvalOutcome, hypothesis: Hypothesis | None, ctx: EvalContext) -> str:
    if hypothesis is None:
        return "none"
    bound = evaluate(hypothesis.bound, ctx)
    return _verdict(outcome, hypothesis.relation, bound)


test_hypothesis.__test__ = False  # keep pytest from collecting it


def _verdict(outcome: EvalOutcome, relation: str, bound: EvalOutcome) -> str:
    if not isinstance(outcome, Value) or not isinstance(bound, Value):
        return "indeterminate"
    if relation == "le":
        ok = outcome.value <= bound.value
    else:
        ok = outcome.value >= bound.value
    return "supported" if ok else "rejected"


def _context(plan: MeasurementPlan, store: EvidenceStore, period: str) -> EvalContext:
    return EvalContext(plan.parameters, store.view(period))


def compute_metric(plan: MeasurementPlan, metric_id: str, store: EvidenceStore, period: str) -> MetricResult:
    return _compute(plan, metric_id, _context(plan, store, period), period)


def _compute(plan: MeasurementPlan, metric_id: str, ctx: EvalContext, period: str) -> MetricResult:
    m = plan.metric(metric_id)
    outcome = evaluate(m.formula, ctx)
    bound = None
    verdict = "none"
    if m.hypothesis is not None:
        bound = evaluate(m.hypothesis.bound, ctx)
        verdict = _verdict(outcome, m.hypothesis.relation, bound)
    return MetricResult(metric_id, period, outcome, classify(outcome, m.targets), verdict, bound)


def run_measurement(
    plan: MeasurementPlan, store: EvidenceStore, period: str, run_timestamp: str | None = None
) -> MeasurementRun:
    """Measure every metric of ``plan`` over one period.

    ``run_timestamp`` defaults to the end of the period so that a rerun over the
    same evidence yields the same run.
    """
    _, end = period_bounds(period, plan.period_policy)
    ctx = _context(plan, store, period)
    results = tuple(_compute(plan, m.metric_id, ctx, period) for m in plan.metrics)
    by_id = {r.metric_id: r.status for r in results}
    questions: dict = {}
    goals: dict = {}
    for g in plan.goals:
        for q in g.questions:
            questions[q.question_id] = (
                g.goal_id,
                q.metric_refs,
                aggregate_status([by_id[ref] for ref in q.metric_refs]),
            )
        qids = tuple(q.question_id for q in g.questions)
        goals[g.goal_id] = (qids, aggregate_status([questions[q][2] for q in qids]))
    return MeasurementRun(
        plan_id=plan.plan_id,
        period=period,
        evidence_digest=store.digest(period),
        run_timestamp=run_timestamp or format_timestamp(end),
        results=results,
        question_statuses=questions,
        goal_statuses=goals,
    )


def trend(runs: Sequence[MeasurementRun], plan: MeasurementPlan, metric_id: str) -> TrendSeries:
    """Endpoint comparison of the first and last defined values, read by the metric's direction."""
    periods = [r.period for r in runs]
    if any(a >= b for a, b in zip(periods, periods[1:])):
        raise ValueError("runs must be in strictly increasing period order")
    points = tuple((run.period, run.result(metric_id).outcome) for run in runs)
    values = [o.value for _, o in points if isinstance(o, Value)]
    targets = plan.metric(metric_id).targets
    direction = targets.direction if targets is not None else None
    if len(values) < 2 or direction is None:
        assessment = "insufficient_data"
    elif values[-1] == values[0]:
        assessment = "flat"
    else:
        better = values[-1] > values[0]
        if direction == "lower_better":
            better = not better
        assessment = "improving" if better else "degrading"
    return TrendSeries(metric_id, points, assessment)


# -- run documents ----------------------------------------------------------


def outcome_doc(o: EvalOutcome | None):
    if o is None:
        return None
    if isinstance(o, Value):
        return {"kind": "value", "value": o.value}
    return {"kind": "undefined", "reason": o.reason}


def outcome_from_doc(doc) -> EvalOutcome | None:
    if doc is None:
        return None
    if doc["kind"] == "value":
        return Value(Fraction(Decimal(doc["value"])))
    return Undefined(doc["reason"])


def run_doc(run: MeasurementRun) -> dict:
    return {
        "plan_id": run.plan_id,
        "period": run.period,
        "evidence_digest": run.evidence_digest,
        "run_timestamp": run.run_timestamp,
        "aggregation": AGGREGATION_RULE,
        "metrics": [
            {
                "metric_id": r.metric_id,
                "outcome": outcome_doc(r.outcome),
                "status": r.status.label,
                "hypothesis_verdict": r.hypothesis_verdict,
                "hypothesis_bound": outcome_doc(r.hypothesis_bound),
            }
            for r in run.results
        ],
        "questions": [
            {"question_id": qid, "goal_id": gid, "metric_refs": list(refs), "status": st.label}
            for qid, (gid, refs, st) in run.question_statuses.items()
        ],
        "goals": [
            {"goal_id": gid, "question_refs": list(qids), "status": st.label}
            for gid, (qids, st) in run.goal_statuses.items()
        ],
    }


def serialize_run(run: MeasurementRun) -> str:
    return canon.dumps(run_doc(run))


def run_from_doc(doc: Mapping) -> MeasurementRun:
    period = doc["period"]
    results = tuple(
        MetricResult(
            metric_id=m["metric_id"],
            period=period,
            outcome=outcome_from_doc(m["outcome"]),
            status=Status.from_label(m["status"]),
            hypothesis_verdict=m["hypothesis_verdict"],
            hypothesis_bound=outcome_from_doc(m["hypothesis_bound"]),
        )
        for m in doc["metrics"]
    )
    return MeasurementRun(
        plan_id=doc["plan_id"],
        period=period,
        evidence_digest=doc["evidence_digest"],
        run_timestamp=doc["run_timestamp"],
        results=results,
        question_statuses={
            q["question_id"]: (q["goal_id"], tuple(q["metric_refs"]), Status.from_label(q["status"]))
            for q in doc["questions"]
        },
        goal_statuses={
            g["goal_id"]: (tuple(g["question_refs"]), Status.from_label(g["status"])) for g in doc["goals"]
        },
    )


def load_run(text: str) -> MeasurementRun:
    return run_from_doc(canon.loads(text))


def recheck_rollup(doc: Mapping) -> list[str]:
    """Recompute question and goal statuses from a run document; return mismatches."""
    metric_status = {m["metric_id"]: Status.from_label(m["status"]) for m in doc["metrics"]}
    problems = []
    q_status = {}
    for q in doc["questions"]:
        expected = aggregate_status([metric_status[ref] for ref in q["metric_refs"]])
        q_status[q["question_id"]] = expected
        if expected.label != q["status"]:
            problems.append(f"question {q['question_id']}: stored {q['status']}, recomputed {expected.label}")
    for g in doc["goals"]:
        expected = aggregate_status([q_status[qid] for qid in g["question_refs"]])
        if expected.label != g["status"]:
            problems.append(f"goal {g['goal_id']}: stored {g['status']}, recomputed {expected.label}")
    return problems


