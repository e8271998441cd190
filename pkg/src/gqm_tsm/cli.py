"""Command-line interface.

Exit codes: 0 success, 1 lint/validation errors (or rejected hypotheses and
warnings under --strict), 2 I/O or store errors, 3 parse errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from .engine import load_run, run_measurement, serialize_run, trend
from .esm_lint import ERROR, escalate, findings_doc, lint_plan, render_text
from .evidence import EvidenceStore, StoreError, period_bounds
from .plan_model import MeasurementPlan, PlanParseError, load_plan, validate_structure
from .report import ReportError, diff_runs, render_construct, render_trend

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_PARSE = 3

DEMO_PERIODS = ("2013-04", "2013-05", "2013-06")


class _Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code
        self.message = message


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Exit(EXIT_PARSE, f"{self.prog}: error: {message}")


def bundled_text(name: str) -> str:
    return resources.files("gqm_tsm").joinpath("data", name).read_text(encoding="utf-8")


def _read_plan(path: str) -> MeasurementPlan:
    try:
        return load_plan(path)
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot read plan {path}: {exc}") from None
    except PlanParseError as exc:
        raise _Exit(EXIT_PARSE, "\n".join(f"{path}:{e}" for e in exc.errors)) from None


def _valid_plan(path: str) -> MeasurementPlan:
    plan = _read_plan(path)
    errors = validate_structure(plan)
    if errors:
        raise _Exit(EXIT_INVALID, "\n".join(f"{path}: {e}" for e in errors))
    return plan


def _open_store(path: str, plan: MeasurementPlan, create: bool = False) -> EvidenceStore:
    try:
        return EvidenceStore.open(path, plan.period_policy, create=create)
    except (StoreError, OSError) as exc:
        raise _Exit(EXIT_IO, str(exc)) from None


def _check_period(period: str, plan: MeasurementPlan) -> None:
    try:
        period_bounds(period, plan.period_policy)
    except ValueError as exc:
        raise _Exit(EXIT_PARSE, str(exc)) from None


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot write {path}: {exc}") from None


def _emit(text: str, output: str | None) -> None:
    if output:
        _write(Path(output), text)
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------


def cmd_lint(args) -> int:
    plan = _read_plan(args.plan)
    structure = validate_structure(plan)
    findings = lint_plan(plan)
    if args.strict:
        findings = escalate(findings)
    for e in structure:
        print(f"ERROR structure subject={e.subject} {e.message}", file=sys.stderr)
    if args.format == "json":
        sys.stdout.write(findings_doc(findings))
    elif not args.quiet:
        sys.stdout.write(render_text(findings))
    failed = structure or any(f.severity == ERROR for f in findings)
    return EXIT_INVALID if failed else EXIT_OK


def _ingest(plan: MeasurementPlan, store_dir: str, evidence: str):
    store = _open_store(store_dir, plan, create=True)
    try:
        with open(evidence, "rb") as fh:
            return store.ingest(fh)
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot read evidence {evidence}: {exc}") from None


def cmd_ingest(args) -> int:
    plan = _valid_plan(args.plan)
    summary = _ingest(plan, args.store_dir, args.evidence)
    for n, reason in summary.rejected:
        print(f"{args.evidence}:{n}: rejected: {reason}", file=sys.stderr)
    if not args.quiet:
        print(f"accepted {summary.accepted}, rejected {len(summary.rejected)}")
    if args.strict and summary.rejected:
        return EXIT_INVALID
    return EXIT_OK


def _measure(plan, store, period, out_dir: Path, timestamp=None):
    run = run_measurement(plan, store, period, timestamp)
    path = out_dir / f"{plan.plan_id}.{period}.run.json"
    _write(path, serialize_run(run))
    return run, path


def cmd_measure(args) -> int:
    plan = _valid_plan(args.plan)
    _check_period(args.period, plan)
    store = _open_store(args.store_dir, plan)
    run, path = _measure(plan, store, args.period, Path(args.out), args.timestamp)
    if not args.quiet:
        goals = ", ".join(f"{g}={st.label}" for g, (_, st) in run.goal_statuses.items())
        print(f"wrote {path} (digest {run.evidence_digest}; {goals})")
    rejected = [r.metric_id for r in run.results if r.hypothesis_verdict == "rejected"]
    if args.strict and rejected:
        print(f"hypotheses rejected: {', '.join(rejected)}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def _load_run_file(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _Exit(EXIT_IO, f"cannot read run {path}: {exc}") from None
    try:
        return load_run(text)
    except (ValueError, KeyError, TypeError) as exc:
        raise _Exit(EXIT_PARSE, f"{path}: not a run document ({exc})") from None


def cmd_report(args) -> int:
    run = _load_run_file(args.run)
    plan = _read_plan(args.plan)
    try:
        text = render_construct(run, plan, args.format)
    except ReportError as exc:
        raise _Exit(EXIT_INVALID, str(exc)) from None
    _emit(text, args.output)
    return EXIT_OK


def cmd_trend(args) -> int:
    plan = _valid_plan(args.plan)
    for p in args.periods:
        _check_period(p, plan)
    store = _open_store(args.store_dir, plan)
    periods = sorted(set(args.periods))
    runs = [run_measurement(plan, store, p) for p in periods]
    series = [trend(runs, plan, m.metric_id) for m in plan.metrics]
    _emit(render_trend(series, args.format, f"Trend report: {plan.plan_id}"), args.output)
    return EXIT_OK


def cmd_diff(args) -> int:
    a, b = _load_run_file(args.run_a), _load_run_file(args.run_b)
    try:
        _emit(diff_runs(a, b), args.output)
    except ReportError as exc:
        raise _Exit(EXIT_INVALID, str(exc)) from None
    return EXIT_OK


def cmd_demo(args) -> int:
    out = Path(args.out_dir)
    plan_path = out / "table2.plan.json"
    evidence_path = out / "demo_evidence.ndjson"
    _write(plan_path, bundled_text("table2.plan.json"))
    _write(evidence_path, bundled_text("demo_evidence.ndjson"))
    plan = _valid_plan(str(plan_path))
    store_dir = out / "store"
    summary = _ingest(plan, str(store_dir), str(evidence_path))
    runs = []
    for period in DEMO_PERIODS:
        run, _ = _measure(plan, _open_store(str(store_dir), plan), period, out)
        runs.append(run)
        _write(out / f"{plan.plan_id}.{period}.report.md", render_construct(run, plan, "markdown"))
    series = [trend(runs, plan, m.metric_id) for m in plan.metrics]
    _write(out / f"{plan.plan_id}.trend.md", render_trend(series, "markdown", f"Trend report: {plan.plan_id}"))
    if not args.quiet:
        print(f"ingested {summary.accepted} records into {store_dir} ({len(summary.rejected)} rejected)")
        for run in runs:
            goals = ", ".join(f"{g}={st.label}" for g, (_, st) in run.goal_statuses.items())
            print(f"{run.period}: digest {run.evidence_digest}; {goals}")
        print(f"outputs written to {out}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--strict", action="store_true", default=argparse.SUPPRESS,
                        help="treat ESM warnings and rejected hypotheses as errors")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="suppress summaries on stdout")

    parser = _Parser(prog="gqm-tsm", description="GQM technical security metric engine")
    parser.add_argument("--strict", action="store_true")
    parser.add_argument("--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("lint", parents=[common], help="validate a plan and check the eight ESM criteria")
    p.add_argument("plan")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("ingest", parents=[common], help="ingest newline-delimited evidence into a store")
    p.add_argument("plan")
    p.add_argument("store_dir")
    p.add_argument("evidence")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("measure", parents=[common], help="compute all metrics for one period")
    p.add_argument("plan")
    p.add_argument("store_dir")
    p.add_argument("period")
    p.add_argument("--out", default=".", help="directory for the run document")
    p.add_argument("--timestamp", help="run timestamp to record (default: end of period)")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("report", parents=[common], help="render a run as a measurement-construct report")
    p.add_argument("run")
    p.add_argument("plan")
    p.add_argument("--format", choices=("markdown", "machine"), default="markdown")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("trend", parents=[common], help="trend table across periods")
    p.add_argument("plan")
    p.add_argument("store_dir")
    p.add_argument("periods", nargs="+", metavar="period")
    p.add_argument("--format", choices=("markdown", "machine"), default="markdown")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_trend)

    p = sub.add_parser("diff", parents=[common], help="status changes between two run documents")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("demo", parents=[common], help="run the bundled reference plan end to end")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_PARSE
        return args.func(args)
    except _Exit as exc:
        if exc.message:
            print(exc.message, file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
