"""GQM-based technical security metrics for network security management.

Load a goal-question-metric plan, ingest evidence, measure a period, lint the
plan against the eight effective-security-metric criteria and render
reproducible reports.
"""

from .engine import Status, classify, aggregate_status, run_measurement, trend
from .esm_lint import criterion_matrix, lint_plan
from .evidence import EvidenceStore, PeriodPolicy, assign_period, snapshot_digest
from .metric_expr import evaluate, parse_expr, print_expr, typecheck
from .plan_model import MeasurementPlan, canonicalize, parse_plan, validate_structure
from .report import diff_runs, render_construct, render_trend

__version__ = "0.1.0"

__all__ = [
    "EvidenceStore",
    "MeasurementPlan",
    "PeriodPolicy",
    "Status",
    "aggregate_status",
    "assign_period",
    "canonicalize",
    "classify",
    "criterion_matrix",
    "diff_runs",
    "evaluate",
    "lint_plan",
    "parse_expr",
    "parse_plan",
    "print_expr",
    "render_construct",
    "render_trend",
    "run_measurement",
    "snapshot_digest",
    "trend",
    "typecheck",
    "validate_structure",
]
