from __future__ import annotations

import sys
from datetime import datetime, timezone
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gqm_tsm.evidence import EvidenceStore, PeriodView, record_from_doc  # noqa: E402
from gqm_tsm.plan_model import parse_plan  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "gqm_tsm" / "data"
PLAN_PATH = DATA / "table2.plan.json"
EVIDENCE_PATH = DATA / "demo_evidence.ndjson"
SEEDED = Path(__file__).parent / "data" / "seeded"
GOLDEN = Path(__file__).parent / "golden"
DEMO_PERIODS = ("2013-04", "2013-05", "2013-06")


@pytest.fixture(scope="session")
def plan_text() -> str:
    return PLAN_PATH.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def plan(plan_text):
    return parse_plan(plan_text)


@pytest.fixture(scope="session")
def evidence_lines() -> list[str]:
    return EVIDENCE_PATH.read_text(encoding="utf-8").splitlines()


@pytest.fixture()
def demo_store(plan, evidence_lines):
    store = EvidenceStore(plan.period_policy)
    summary = store.ingest(evidence_lines)
    assert summary.accepted == 500
    return store


def make_view(records: list[dict]) -> PeriodView:
    """Build an evidence view from oracle-style dict records."""
    ts = datetime(2013, 5, 17, 10, tzinfo=timezone.utc).isoformat()
    return PeriodView(record_from_doc({**r, "timestamp": ts}) for r in records)


# criterion number -> (passed, detail); filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
