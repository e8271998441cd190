import dataclasses
import json
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from gqm_tsm import canon
from gqm_tsm.engine import (
    Status,
    aggregate_status,
    classify,
    compute_metric,
    load_run,
    recheck_rollup,
    run_doc,
    run_measurement,
    serialize_run,
    test_hypothesis as check_hypothesis,
    trend,
)
from gqm_tsm.evidence import EvidenceStore
from gqm_tsm.metric_expr import EvalContext, NumberLit, Undefined, Value, parse_expr
from gqm_tsm.plan_model import Hypothesis, TargetBands

from conftest import DEMO_PERIODS, make_view
from oracle import CLASSIFY_TABLE

TS = "2013-05-10T00:00:00Z"


def store_of(plan, records):
    store = EvidenceStore(plan.period_policy)
    lines = [json.dumps({"record_id": f"R{i}", "timestamp": TS, **r}) for i, r in enumerate(records)]
    assert store.ingest(lines).accepted == len(records)
    return store


def incident():
    return {"kind": "incident", "attributes": {"severity": "low", "source": "ids"}}


def audit(hours):
    return {"kind": "password_audit", "attributes": {
        "policy_compliant": "true", "crack_time_hours": hours, "shared": "false", "source": "manual"}}


def V(x):
    return Value(Fraction(Decimal(str(x))))


# -- compute_metric ------------------------------------------------------------


def test_incidents_over_threshold(plan):
    p = dataclasses.replace(plan, parameters={**plan.parameters, "incident_threshold": Decimal(5)})
    r = compute_metric(p, "M2.2", store_of(p, [incident() for _ in range(7)]), "2013-05")
    assert r.outcome == Value(Fraction(2))
    assert r.status == Status.UNACCEPTABLE
    assert r.hypothesis_verdict == "rejected"


def test_weak_password_share(plan):
    recs = [audit(h) for h in (1, 2, 4)] + [audit(48) for _ in range(9)]
    r = compute_metric(plan, "M6.4", store_of(plan, recs), "2013-05")
    assert r.outcome == Value(Fraction(1, 4))


def test_no_corrective_actions(plan):
    r = compute_metric(plan, "M3.2", store_of(plan, []), "2013-05")
    assert isinstance(r.outcome, Undefined)
    assert r.status == Status.UNKNOWN


# -- classify --------------------------------------------------------------------


@pytest.mark.parametrize("direction, e, a, v, label", CLASSIFY_TABLE)
def test_classify_table(direction, e, a, v, label):
    bands = TargetBands(direction, Decimal(e), Decimal(a))
    assert classify(V(v), bands).label == label


def test_classify_examples():
    bands = TargetBands("higher_better", Decimal("0.9"), Decimal("0.7"))
    assert classify(V("0.95"), bands) == Status.EXCELLENT
    assert classify(V("0.7"), bands) == Status.ACCEPTABLE
    assert classify(Undefined("division 0/0"), bands) == Status.UNKNOWN


def test_classify_unknown_without_targets():
    assert classify(V(1), None) == Status.UNKNOWN
    assert classify(V(1), TargetBands(None, Decimal(1), Decimal(0))) == Status.UNKNOWN
    assert classify(V(1), TargetBands("higher_better", None, Decimal(0))) == Status.UNKNOWN


decs = st.decimals(min_value=-1000, max_value=1000, places=3)


@given(decs, decs, decs)
def test_classify_duality(v, x, y):
    e, a = max(x, y), min(x, y)
    hb = TargetBands("higher_better", e, a)
    lb = TargetBands("lower_better", -e, -a)
    assert classify(Value(Fraction(v)), hb) == classify(Value(Fraction(-v)), lb)


# -- aggregation -----------------------------------------------------------------


def test_aggregate_examples():
    assert aggregate_status([Status.EXCELLENT, Status.ACCEPTABLE]) == Status.ACCEPTABLE
    assert aggregate_status([Status.ACCEPTABLE, Status.UNKNOWN, Status.EXCELLENT]) == Status.UNKNOWN
    assert aggregate_status([Status.UNKNOWN, Status.UNACCEPTABLE]) == Status.UNACCEPTABLE
    with pytest.raises(ValueError):
        aggregate_status([])


statuses = st.lists(st.sampled_from(list(Status)), min_size=1, max_size=12)


@given(statuses, st.randoms(use_true_random=False))
def test_aggregate_permutation(children, rnd):
    shuffled = list(children)
    rnd.shuffle(shuffled)
    assert aggregate_status(shuffled) == aggregate_status(children) == min(children)


@given(statuses, st.data())
def test_aggregate_monotone(children, data):
    i = data.draw(st.integers(0, len(children) - 1))
    better = data.draw(st.sampled_from([s for s in Status if s >= children[i]]))
    improved = children[:i] + [better] + children[i + 1:]
    assert aggregate_status(improved) >= aggregate_status(children)


# -- hypotheses ------------------------------------------------------------------


def test_hypothesis_verdicts():
    ctx = EvalContext({}, make_view([]))
    le5 = Hypothesis("le", NumberLit(Decimal(5)))
    assert check_hypothesis(V(7), le5, ctx) == "rejected"
    assert check_hypothesis(V(5), le5, ctx) == "supported"
    assert check_hypothesis(Undefined("division 1/0"), le5, ctx) == "indeterminate"
    assert check_hypothesis(V(5), Hypothesis("ge", parse_expr("1 / 0")), ctx) == "indeterminate"
    assert check_hypothesis(V(4), Hypothesis("ge", NumberLit(Decimal(5))), ctx) == "rejected"
    assert check_hypothesis(V(4), None, ctx) == "none"


# -- runs --------------------------------------------------------------------------


def test_run_shape(plan, demo_store):
    run = run_measurement(plan, demo_store, "2013-05")
    assert len(run.results) == 18
    assert len(run.question_statuses) == 8
    assert len(run.goal_statuses) == 1
    assert [r.metric_id for r in run.results] == [m.metric_id for m in plan.metrics]
    assert run.evidence_digest == demo_store.digest("2013-05")
    assert run.run_timestamp == "2013-05-31T16:00:00Z"


def test_run_deterministic(plan, demo_store):
    a = serialize_run(run_measurement(plan, demo_store, "2013-04"))
    b = serialize_run(run_measurement(plan, demo_store, "2013-04"))
    assert a == b


def test_demo_goal_statuses(plan, demo_store):
    got = [run_measurement(plan, demo_store, p).goal_statuses["G1"][1].label for p in DEMO_PERIODS]
    assert got == ["Unacceptable", "Unacceptable", "Acceptable"]


def test_unknown_period_runs_empty(plan, demo_store):
    run = run_measurement(plan, demo_store, "1990-01")
    assert run.evidence_digest == "cbf29ce484222325"
    assert run.result("M3.2").status == Status.UNKNOWN


def test_mutation_changes_digest(plan, evidence_lines):
    a = EvidenceStore(plan.period_policy)
    a.ingest(evidence_lines)
    mutated = [l.replace('"severity": "low"', '"severity": "high"', 1) if "EV-201305" in l else l
               for l in evidence_lines]
    assert mutated != evidence_lines
    b = EvidenceStore(plan.period_policy)
    b.ingest(mutated)
    ra, rb = run_measurement(plan, a, "2013-05"), run_measurement(plan, b, "2013-05")
    assert ra.evidence_digest != rb.evidence_digest


def test_run_doc_round_trip(plan, demo_store):
    for p in DEMO_PERIODS:
        run = run_measurement(plan, demo_store, p)
        text = serialize_run(run)
        again = load_run(text)
        assert serialize_run(again) == text
        assert recheck_rollup(canon.loads(text)) == []


def test_recheck_detects_tampering(plan, demo_store):
    doc = canon.loads(serialize_run(run_measurement(plan, demo_store, "2013-06")))
    doc["questions"][0]["status"] = "Excellent" if doc["questions"][0]["status"] != "Excellent" else "Unknown"
    problems = recheck_rollup(doc)
    assert problems and problems[0].startswith("question Q1")


def test_run_doc_key_order(plan, demo_store):
    doc = run_doc(run_measurement(plan, demo_store, "2013-05"))
    assert list(doc) == ["plan_id", "period", "evidence_digest", "run_timestamp", "aggregation",
                         "metrics", "questions", "goals"]


# -- trends ----------------------------------------------------------------------


def _runs_with(plan, demo_store, metric_id, values):
    base = run_measurement(plan, demo_store, "2013-04")
    runs = []
    for i, v in enumerate(values):
        period = f"2013-{i + 4:02d}"
        results = tuple(dataclasses.replace(r, period=period, outcome=V(v) if r.metric_id == metric_id else r.outcome)
                        for r in base.results)
        runs.append(dataclasses.replace(base, period=period, results=results))
    return runs


def test_trend_examples(plan, demo_store):
    assert trend(_runs_with(plan, demo_store, "M4.1", ["0.80", "0.85", "0.90"]), plan, "M4.1").assessment == "improving"
    assert trend(_runs_with(plan, demo_store, "M4.1", ["0.90", "0.80"]), plan, "M4.1").assessment == "degrading"
    assert trend(_runs_with(plan, demo_store, "M4.1", ["0.80"]), plan, "M4.1").assessment == "insufficient_data"
    assert trend(_runs_with(plan, demo_store, "M2.2", [2, 2]), plan, "M2.2").assessment == "flat"
    assert trend(_runs_with(plan, demo_store, "M2.2", [2, 1]), plan, "M2.2").assessment == "improving"


def test_trend_requires_order(plan, demo_store):
    runs = _runs_with(plan, demo_store, "M4.1", ["0.8", "0.9"])
    with pytest.raises(ValueError):
        trend(runs[::-1], plan, "M4.1")


def test_trend_skips_undefined(plan, demo_store):
    runs = [run_measurement(plan, demo_store, "1990-01")]
    s = trend(runs + [run_measurement(plan, demo_store, "2013-05")], plan, "M3.2")
    assert s.assessment == "insufficient_data"
