"""GQM measurement plans: data model, document parsing, validation, canonical form.

A plan document is JSON with these top-level keys, in canonical order::

    plan_id, organization, description, period_policy, parameters, metrics, goals

Metrics live in one flat table and questions refer to them by id, so one
metric can answer several questions of the same goal.
"""

from __future__ import annotations

import json
import json.decoder
import json.scanner
import re
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Any, Iterator, Mapping

from . import canon
from .evidence import PeriodPolicy
from .metric_expr import Expr, ExprSyntaxError, parse_expr, print_expr, typecheck
from .schema import KIND_SCHEMAS

GOAL_ID_RE = re.compile(r"^G\d+$")
METRIC_ID_RE = re.compile(r"^M\d+\.\d+$")

DIRECTIONS = ("higher_better", "lower_better")
FREQUENCIES = ("per_period", "on_event")
RELATIONS = ("le", "ge")

PLAN_KEYS = ("plan_id", "organization", "description", "period_policy", "parameters", "metrics", "goals")
POLICY_KEYS = ("granularity", "timezone_rule")
METRIC_KEYS = (
    "metric_id",
    "name",
    "unit",
    "formula",
    "data_sources",
    "collection_frequency",
    "responsible_role",
    "audience",
    "targets",
    "hypothesis",
    "review_note",
)
TARGET_KEYS = ("direction", "excellent_at", "acceptable_at")
HYPOTHESIS_KEYS = ("relation", "bound")
GOAL_KEYS = ("goal_id", "control_ref", "objective", "business_goal", "questions")
QUESTION_KEYS = ("question_id", "text", "metric_refs")


# -- model ------------------------------------------------------------------


@dataclass(frozen=True)
class TargetBands:
    direction: str | None
    excellent_at: Decimal | None
    acceptable_at: Decimal | None

    @property
    def complete(self) -> bool:
        return self.excellent_at is not None and self.acceptable_at is not None


@dataclass(frozen=True)
class Hypothesis:
    relation: str
    bound: Expr


@dataclass(frozen=True)
class Metric:
    metric_id: str
    name: str
    unit: str
    formula: Expr
    data_sources: tuple[str, ...] = ()
    collection_frequency: str | None = "per_period"
    responsible_role: str = ""
    audience: str = ""
    targets: TargetBands | None = None
    hypothesis: Hypothesis | None = None
    review_note: str = ""


@dataclass(frozen=True)
class Question:
    question_id: str
    text: str
    metric_refs: tuple[str, ...]


@dataclass(frozen=True)
class Goal:
    goal_id: str
    control_ref: str
    objective: str
    business_goal: str
    questions: tuple[Question, ...]


@dataclass(frozen=True)
class MeasurementPlan:
    plan_id: str
    organization: str
    description: str
    period_policy: PeriodPolicy
    parameters: Mapping[str, Decimal]
    metrics: tuple[Metric, ...]
    goals: tuple[Goal, ...]

    def metric(self, metric_id: str) -> Metric:
        for m in self.metrics:
            if m.metric_id == metric_id:
                return m
        raise KeyError(metric_id)

    def questions(self) -> Iterator[tuple[Goal, Question]]:
        for g in self.goals:
            for q in g.questions:
                yield g, q


# -- errors -----------------------------------------------------------------


@dataclass(frozen=True)
class ParseError:
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


class PlanParseError(ValueError):
    """Raised by :func:`parse_plan`; ``errors`` holds every diagnostic found."""

    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        super().__init__("\n".join(str(e) for e in errors))


@dataclass(frozen=True)
class StructureError:
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.subject}: {self.message}"


# -- position-tracking JSON decoding ---------------------------------------


class _Obj(dict):
    line = 1
    column = 1


def _line_col(text: str, index: int) -> tuple[int, int]:
    line = text.count("\n", 0, index) + 1
    return line, index - (text.rfind("\n", 0, index) + 1) + 1


def _decode(text: str, errors: list[ParseError]) -> Any:
    decoder = json.JSONDecoder(parse_float=Decimal, parse_int=Decimal)

    def parse_object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo=None):
        s, start = s_and_end
        pairs, end = json.decoder.JSONObject(s_and_end, strict, scan_once, None, list, memo)
        obj = _Obj()
        obj.line, obj.column = _line_col(s, start - 1)
        for k, v in pairs:
            if k in obj:
                errors.append(ParseError(obj.line, obj.column, f"duplicate key {k!r}"))
            obj[k] = v
        return obj, end

    decoder.parse_object = parse_object
    decoder.scan_once = json.scanner.py_make_scanner(decoder)
    return decoder.decode(text)


# -- parsing ----------------------------------------------------------------


class _Reader:
    """Walks the decoded tree, collecting every problem instead of stopping at the first."""

    def __init__(self):
        self.errors: list[ParseError] = []

    def err(self, at, message: str) -> None:
        line, col = (at.line, at.column) if isinstance(at, _Obj) else (1, 1)
        self.errors.append(ParseError(line, col, message))

    def obj(self, v, where: str, parent, keys, required=()) -> _Obj | None:
        if not isinstance(v, _Obj):
            self.err(parent, f"type mismatch: {where} must be an object")
            return None
        for k in v:
            if k not in keys:
                self.err(v, f"unknown key {k!r} in {where}")
        for k in required:
            if k not in v:
                self.err(v, f"missing key {k!r} in {where}")
        return v

    def text(self, o: _Obj, key: str, where: str, default: str = "") -> str:
        v = o.get(key, default)
        if not isinstance(v, str):
            self.err(o, f"type mismatch: {where}.{key} must be a string")
            return default
        return v

    def opt_text(self, o: _Obj, key: str, where: str, choices) -> str | None:
        v = o.get(key)
        if v is None:
            return None
        if not isinstance(v, str) or v not in choices:
            self.err(o, f"type mismatch: {where}.{key} must be one of {', '.join(choices)}")
            return None
        return v

    def number(self, o: _Obj, key: str, where: str) -> Decimal | None:
        v = o.get(key)
        if v is None:
            return None
        if not isinstance(v, Decimal) or not v.is_finite():
            self.err(o, f"type mismatch: {where}.{key} must be a number")
            return None
        if canon.fractional_digits(v) > canon.PLACES:
            self.err(o, f"{where}.{key} has more than 6 fractional digits")
        return v

    def formula(self, o: _Obj, key: str, where: str) -> Expr | None:
        src = o.get(key)
        if not isinstance(src, str):
            self.err(o, f"type mismatch: {where}.{key} must be formula text")
            return None
        try:
            return parse_expr(src)
        except ExprSyntaxError as exc:
            self.err(o, f"{where}.{key}: {exc}")
            return None

    def list_of(self, o: _Obj, key: str, where: str) -> list:
        v = o.get(key, [])
        if not isinstance(v, list):
            self.err(o, f"type mismatch: {where}.{key} must be a list")
            return []
        return v


def parse_plan(doc: str) -> MeasurementPlan:
    """Parse plan document text.

    Raises :class:`PlanParseError` listing every syntax, key, type, id and
    reference problem with the line and column of the enclosing object.
    """
    errors: list[ParseError] = []
    try:
        root = _decode(doc, errors)
    except json.JSONDecodeError as exc:
        raise PlanParseError([ParseError(exc.lineno, exc.colno, f"malformed JSON: {exc.msg}")]) from None
    r = _Reader()
    r.errors.extend(errors)
    plan = _read_plan(r, root)
    if r.errors or plan is None:
        raise PlanParseError(r.errors or [ParseError(1, 1, "empty plan")])
    return plan


def load_plan(path) -> MeasurementPlan:
    return parse_plan(Path(path).read_text(encoding="utf-8"))


def _read_plan(r: _Reader, root) -> MeasurementPlan | None:
    top = r.obj(root, "plan", None, PLAN_KEYS, ("plan_id", "period_policy", "metrics", "goals"))
    if top is None:
        return None
    plan_id = r.text(top, "plan_id", "plan")
    if "plan_id" in top and not plan_id:
        r.err(top, "plan_id must be non-empty")

    policy = PeriodPolicy()
    pp = top.get("period_policy")
    if pp is not None and r.obj(pp, "period_policy", top, POLICY_KEYS, POLICY_KEYS) is not None:
        try:
            policy = PeriodPolicy(
                r.text(pp, "granularity", "period_policy", "month"),
                r.text(pp, "timezone_rule", "period_policy", "+00:00"),
            )
        except ValueError as exc:
            r.err(pp, str(exc))

    params: dict[str, Decimal] = {}
    raw_params = top.get("parameters", _Obj())
    if not isinstance(raw_params, _Obj):
        r.err(top, "type mismatch: parameters must be an object")
    else:
        for name in raw_params:
            v = r.number(raw_params, name, "parameters")
            if v is not None:
                params[name] = v

    metrics: list[Metric] = []
    seen_metrics: set[str] = set()
    for raw in r.list_of(top, "metrics", "plan"):
        m = _read_metric(r, raw, top)
        if m is None:
            continue
        if m.metric_id in seen_metrics:
            r.err(raw, f"duplicate metric id {m.metric_id}")
        seen_metrics.add(m.metric_id)
        metrics.append(m)

    goals: list[Goal] = []
    seen_goals: set[str] = set()
    seen_questions: set[str] = set()
    for raw in r.list_of(top, "goals", "plan"):
        g = _read_goal(r, raw, top, seen_metrics, seen_questions)
        if g is None:
            continue
        if g.goal_id in seen_goals:
            r.err(raw, f"duplicate goal id {g.goal_id}")
        seen_goals.add(g.goal_id)
        goals.append(g)

    return MeasurementPlan(
        plan_id=plan_id,
        organization=r.text(top, "organization", "plan"),
        description=r.text(top, "description", "plan"),
        period_policy=policy,
        parameters=params,
        metrics=tuple(metrics),
        goals=tuple(goals),
    )


def _read_metric(r: _Reader, raw, parent) -> Metric | None:
    o = r.obj(raw, "metric", parent, METRIC_KEYS, ("metric_id", "formula"))
    if o is None:
        return None
    mid = r.text(o, "metric_id", "metric")
    where = f"metric {mid}"
    if not METRIC_ID_RE.match(mid):
        r.err(o, f"metric id {mid!r} does not match M<digits>.<digits>")
    formula = r.formula(o, "formula", where)

    sources = []
    for s in r.list_of(o, "data_sources", where):
        if isinstance(s, str):
            sources.append(s)
        else:
            r.err(o, f"type mismatch: {where}.data_sources entries must be strings")

    targets = None
    raw_t = o.get("targets")
    if raw_t is not None and r.obj(raw_t, f"{where}.targets", o, TARGET_KEYS) is not None:
        targets = TargetBands(
            r.opt_text(raw_t, "direction", f"{where}.targets", DIRECTIONS),
            r.number(raw_t, "excellent_at", f"{where}.targets"),
            r.number(raw_t, "acceptable_at", f"{where}.targets"),
        )
        if targets.complete and targets.direction is not None:
            e, a = targets.excellent_at, targets.acceptable_at
            if (targets.direction == "higher_better" and e < a) or (
                targets.direction == "lower_better" and e > a
            ):
                r.err(raw_t, f"{where}: inverted target bands for {targets.direction}")

    hyp = None
    raw_h = o.get("hypothesis")
    if raw_h is not None and r.obj(raw_h, f"{where}.hypothesis", o, HYPOTHESIS_KEYS, HYPOTHESIS_KEYS) is not None:
        relation = r.opt_text(raw_h, "relation", f"{where}.hypothesis", RELATIONS)
        bound = r.formula(raw_h, "bound", f"{where}.hypothesis")
        if relation is not None and bound is not None:
            hyp = Hypothesis(relation, bound)

    if formula is None:
        return None
    return Metric(
        metric_id=mid,
        name=r.text(o, "name", where),
        unit=r.text(o, "unit", where),
        formula=formula,
        data_sources=tuple(sources),
        collection_frequency=r.opt_text(o, "collection_frequency", where, FREQUENCIES),
        responsible_role=r.text(o, "responsible_role", where),
        audience=r.text(o, "audience", where),
        targets=targets,
        hypothesis=hyp,
        review_note=r.text(o, "review_note", where),
    )


def _read_goal(r: _Reader, raw, parent, metric_ids, seen_questions) -> Goal | None:
    o = r.obj(raw, "goal", parent, GOAL_KEYS, ("goal_id", "questions"))
    if o is None:
        return None
    gid = r.text(o, "goal_id", "goal")
    where = f"goal {gid}"
    if not GOAL_ID_RE.match(gid):
        r.err(o, f"goal id {gid!r} does not match G<digits>")
    questions = []
    for raw_q in r.list_of(o, "questions", where):
        q = r.obj(raw_q, "question", o, QUESTION_KEYS, QUESTION_KEYS)
        if q is None:
            continue
        qid = r.text(q, "question_id", "question")
        if not qid:
            r.err(q, "question_id must be non-empty")
        if qid in seen_questions:
            r.err(q, f"duplicate question id {qid}")
        seen_questions.add(qid)
        refs = []
        for ref in r.list_of(q, "metric_refs", f"question {qid}"):
            if not isinstance(ref, str):
                r.err(q, f"type mismatch: metric_refs of {qid} must be strings")
            elif ref not in metric_ids:
                r.err(q, f"unresolved metric_ref {ref} at {qid}")
            else:
                refs.append(ref)
        questions.append(Question(qid, r.text(q, "text", f"question {qid}"), tuple(refs)))
    return Goal(
        goal_id=gid,
        control_ref=r.text(o, "control_ref", where),
        objective=r.text(o, "objective", where),
        business_goal=r.text(o, "business_goal", where),
        questions=tuple(questions),
    )


# -- structural validation -------------------------------------------------


def validate_structure(plan: MeasurementPlan) -> list[StructureError]:
    """Check the hierarchy shape and every formula's references."""
    errors: list[StructureError] = []
    referenced: set[str] = set()
    for _, q in plan.questions():
        if not q.metric_refs:
            errors.append(StructureError(q.question_id, "question has no metrics"))
        referenced.update(q.metric_refs)
    for m in plan.metrics:
        if m.metric_id not in referenced:
            errors.append(StructureError(m.metric_id, "orphan metric (not referenced by any question)"))
        for s in m.data_sources:
            if s not in KIND_SCHEMAS:
                errors.append(StructureError(m.metric_id, f"unknown evidence kind {s!r} in data_sources"))
        for e in typecheck(m.formula, plan.parameters, kinds=m.data_sources):
            errors.append(StructureError(m.metric_id, f"formula: {e}"))
        if m.hypothesis is not None:
            for e in typecheck(m.hypothesis.bound, plan.parameters, kinds=m.data_sources):
                errors.append(StructureError(m.metric_id, f"hypothesis bound: {e}"))
    return errors


# -- canonical form ---------------------------------------------------------


def _targets_doc(t: TargetBands | None):
    if t is None:
        return None
    return {"direction": t.direction, "excellent_at": t.excellent_at, "acceptable_at": t.acceptable_at}


def metric_doc(m: Metric) -> dict:
    return {
        "metric_id": m.metric_id,
        "name": m.name,
        "unit": m.unit,
        "formula": print_expr(m.formula),
        "data_sources": list(m.data_sources),
        "collection_frequency": m.collection_frequency,
        "responsible_role": m.responsible_role,
        "audience": m.audience,
        "targets": _targets_doc(m.targets),
        "hypothesis": None
        if m.hypothesis is None
        else {"relation": m.hypothesis.relation, "bound": print_expr(m.hypothesis.bound)},
        "review_note": m.review_note,
    }


def plan_doc(plan: MeasurementPlan) -> dict:
    return {
        "plan_id": plan.plan_id,
        "organization": plan.organization,
        "description": plan.description,
        "period_policy": {
            "granularity": plan.period_policy.granularity,
            "timezone_rule": plan.period_policy.timezone_rule,
        },
        "parameters": {k: plan.parameters[k] for k in sorted(plan.parameters)},
        "metrics": [metric_doc(m) for m in plan.metrics],
        "goals": [
            {
                "goal_id": g.goal_id,
                "control_ref": g.control_ref,
                "objective": g.objective,
                "business_goal": g.business_goal,
                "questions": [
                    {"question_id": q.question_id, "text": q.text, "metric_refs": list(q.metric_refs)}
                    for q in g.questions
                ],
            }
            for g in plan.goals
        ],
    }


def canonicalize(plan: MeasurementPlan) -> str:
    """Canonical document text: fixed key order, 2-space indent, minimal numbers, trailing newline."""
    return canon.dumps(plan_doc(plan))
