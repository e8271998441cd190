import json
import subprocess
import sys

import pytest

from gqm_tsm.cli import main

from conftest import EVIDENCE_PATH, PLAN_PATH, SEEDED

DEMO_FILES = sorted(
    ["table2.plan.json", "demo_evidence.ndjson", "table2.trend.md"]
    + [f"table2.2013-0{m}.{ext}" for m in (4, 5, 6) for ext in ("run.json", "report.md")]
)


def files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != ".lock"}


@pytest.fixture()
def store(tmp_path):
    d = tmp_path / "store"
    assert main(["ingest", str(PLAN_PATH), str(d), str(EVIDENCE_PATH), "--quiet"]) == 0
    return d


def test_demo_reproducible(tmp_path, capsys):
    assert main(["demo", str(tmp_path / "a")]) == 0
    assert main(["demo", str(tmp_path / "b"), "--quiet"]) == 0
    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    assert sorted(n for n in a if "/" not in n) == DEMO_FILES
    assert a == b
    assert "58963a8b038766d2" in capsys.readouterr().out


def test_demo_rerun_in_place(tmp_path):
    assert main(["demo", str(tmp_path), "--quiet"]) == 0
    before = files(tmp_path)
    assert main(["demo", str(tmp_path), "--quiet"]) == 0
    assert files(tmp_path) == before


def test_lint_reference(capsys):
    assert main(["lint", str(PLAN_PATH)]) == 0
    out = capsys.readouterr().out
    assert out.count(" pass ") == 8 and "FAIL" not in out


def test_lint_json_and_defects(capsys):
    assert main(["lint", str(SEEDED / "defect_f.plan.json"), "--format", "json"]) == 1
    doc = json.loads(capsys.readouterr().out)
    assert [c for c, r in doc["matrix"].items() if not r["pass"]] == ["f"]
    assert main(["lint", str(SEEDED / "defect_h.plan.json"), "--quiet"]) == 0
    assert main(["--strict", "lint", str(SEEDED / "defect_h.plan.json"), "--quiet"]) == 1
    assert main(["lint", "--strict", str(SEEDED / "defect_h.plan.json"), "--quiet"]) == 1


def test_lint_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"plan_id": "x",\n "plan_id": "y"}')
    assert main(["lint", str(bad)]) == 3
    assert "bad.json:1:1: duplicate key 'plan_id'" in capsys.readouterr().err
    assert main(["lint", str(tmp_path / "nope.json")]) == 2


def test_measure_and_report(tmp_path, store, capsys):
    out = tmp_path / "out"
    assert main(["measure", str(PLAN_PATH), str(store), "2013-05", "--out", str(out)]) == 0
    run = out / "table2.2013-05.run.json"
    assert json.loads(run.read_text())["evidence_digest"] == "58963a8b038766d2"
    report = tmp_path / "r.md"
    assert main(["report", str(run), str(PLAN_PATH), "-o", str(report)]) == 0
    assert report.read_text().startswith("# Measurement report: table2 (2013-05)")
    capsys.readouterr()
    assert main(["report", str(run), str(PLAN_PATH), "--format", "machine"]) == 0
    assert json.loads(capsys.readouterr().out)["report"] == "measurement-construct"


def test_measure_strict_rejected_hypothesis(tmp_path, store):
    # April has 12 incidents against a threshold of 10
    args = ["measure", str(PLAN_PATH), str(store), "2013-04", "--out", str(tmp_path), "--quiet"]
    assert main(args) == 0
    assert main(args + ["--strict"]) == 1


def test_measure_timestamp_override(tmp_path, store):
    assert main(["measure", str(PLAN_PATH), str(store), "2013-06", "--out", str(tmp_path), "--quiet",
                 "--timestamp", "2013-07-01T09:00:00Z"]) == 0
    doc = json.loads((tmp_path / "table2.2013-06.run.json").read_text())
    assert doc["run_timestamp"] == "2013-07-01T09:00:00Z"


def test_measure_errors(tmp_path, store):
    assert main(["measure", str(PLAN_PATH), str(tmp_path / "none"), "2013-05"]) == 2
    assert main(["measure", str(PLAN_PATH), str(store), "2013-13"]) == 3
    assert main(["measure", str(SEEDED / "defect_d.plan.json"), str(store), "2013-05"]) == 1


def test_ingest_strict(tmp_path, capsys):
    ev = tmp_path / "ev.ndjson"
    ev.write_text(EVIDENCE_PATH.read_text().splitlines()[0] + "\n{oops\n")
    assert main(["ingest", str(PLAN_PATH), str(tmp_path / "s"), str(ev)]) == 0
    captured = capsys.readouterr()
    assert "accepted 1, rejected 1" in captured.out
    assert "ev.ndjson:2: rejected: malformed JSON" in captured.err
    assert main(["ingest", str(PLAN_PATH), str(tmp_path / "s"), str(ev), "--strict"]) == 1


def test_trend_and_diff(tmp_path, store, capsys):
    assert main(["trend", str(PLAN_PATH), str(store), "2013-06", "2013-04", "2013-05"]) == 0
    out = capsys.readouterr().out
    assert "| M1.1 | 0.6 | 0.6 | 0.6 | flat |" in out
    for p in ("2013-04", "2013-06"):
        main(["measure", str(PLAN_PATH), str(store), p, "--out", str(tmp_path), "--quiet"])
    assert main(["diff", str(tmp_path / "table2.2013-04.run.json"), str(tmp_path / "table2.2013-06.run.json")]) == 0
    assert capsys.readouterr().out.startswith("# Run diff: table2 2013-04 -> 2013-06")


def test_usage_errors(capsys):
    assert main([]) == 3
    assert main(["frobnicate"]) == 3
    assert main(["lint"]) == 3


def test_report_not_a_run(tmp_path):
    junk = tmp_path / "junk.json"
    junk.write_text("{}")
    assert main(["report", str(junk), str(PLAN_PATH)]) == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gqm_tsm", "lint", str(PLAN_PATH), "--quiet"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
