"""Evidence records, period partitioning and the on-disk evidence store.

Store layout::

    <store_dir>/store.json          period policy the store was created with
    <store_dir>/<period_id>.ndjson  canonical records, one per line
    <store_dir>/index               record_id<TAB>period_id, sorted

The index is derived data and is rebuilt from the period files on open.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union

from filelock import FileLock

from . import canon
from .metric_expr import Predicate
from .schema import DECIMAL, KIND_SCHEMAS

logger = logging.getLogger(__name__)

AttrValue = Union[Decimal, str]

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1

RECORD_KEYS = ("record_id", "kind", "timestamp", "attributes")
GRANULARITIES = ("month", "quarter")

_OFFSET_RE = re.compile(r"^([+-])(\d{2}):(\d{2})$")
_MONTH_RE = re.compile(r"^(\d{4})-(0[1-9]|1[0-2])$")
_QUARTER_RE = re.compile(r"^(\d{4})-Q([1-4])$")


class StoreError(Exception):
    """The store directory is missing, unreadable or inconsistent."""


class RecordError(ValueError):
    """One evidence line violates the record schema."""


# -- period policy ----------------------------------------------------------


def parse_offset(rule: str) -> timedelta:
    """Parse a fixed-offset designator such as ``+01:00`` or ``Z``."""
    if rule == "Z":
        return timedelta(0)
    m = _OFFSET_RE.match(rule)
    if not m:
        raise ValueError(f"bad timezone_rule {rule!r}; expected +HH:MM")
    hours, minutes = int(m.group(2)), int(m.group(3))
    if minutes >= 60:
        raise ValueError(f"bad timezone_rule {rule!r}")
    delta = timedelta(hours=hours, minutes=minutes)
    if delta > timedelta(hours=14):
        raise ValueError(f"timezone_rule {rule!r} outside +/-14:00")
    return -delta if m.group(1) == "-" else delta


@dataclass(frozen=True)
class PeriodPolicy:
    granularity: str = "month"
    timezone_rule: str = "+00:00"

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be month or quarter, not {self.granularity!r}")
        parse_offset(self.timezone_rule)

    @property
    def tz(self) -> timezone:
        return timezone(parse_offset(self.timezone_rule))


def assign_period(ts: datetime, policy: PeriodPolicy) -> str:
    """Period id of an instant: ``YYYY-MM`` or ``YYYY-Qn`` in the policy's offset."""
    local = ts.astimezone(policy.tz)
    if policy.granularity == "month":
        return f"{local.year:04d}-{local.month:02d}"
    return f"{local.year:04d}-Q{(local.month - 1) // 3 + 1}"


def period_bounds(period_id: str, policy: PeriodPolicy) -> tuple[datetime, datetime]:
    """Half-open ``[start, end)`` instants of a period."""
    tz = policy.tz
    if policy.granularity == "month":
        m = _MONTH_RE.match(period_id)
        if not m:
            raise ValueError(f"bad period id {period_id!r}; expected YYYY-MM")
        year, month = int(m.group(1)), int(m.group(2))
        span = 1
    else:
        m = _QUARTER_RE.match(period_id)
        if not m:
            raise ValueError(f"bad period id {period_id!r}; expected YYYY-Qn")
        year, month = int(m.group(1)), 3 * int(m.group(2)) - 2
        span = 3
    start = datetime(year, month, 1, tzinfo=tz)
    month += span
    if month > 12:
        year, month = year + 1, month - 12
    return start, datetime(year, month, 1, tzinfo=tz)


def parse_timestamp(text: str) -> datetime:
    if not isinstance(text, str):
        raise ValueError("timestamp must be a string")
    s = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    ts = datetime.fromisoformat(s)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return ts


def format_timestamp(ts: datetime) -> str:
    utc = ts.astimezone(timezone.utc)
    spec = "seconds" if utc.microsecond == 0 else "microseconds"
    return utc.replace(tzinfo=None).isoformat(timespec=spec) + "Z"


# -- records ----------------------------------------------------------------


@dataclass(frozen=True)
class EvidenceRecord:
    record_id: str
    kind: str
    timestamp: datetime
    attributes: Mapping[str, AttrValue] = field(hash=False)

    def to_doc(self) -> dict:
        return {
            "record_id": self.record_id,
            "kind": self.kind,
            "timestamp": format_timestamp(self.timestamp),
            "attributes": {k: self.attributes[k] for k in sorted(self.attributes)},
        }

    def canonical_line(self) -> str:
        return canon.dumps(self.to_doc(), indent=None)


def record_from_doc(doc) -> EvidenceRecord:
    """Validate a decoded JSON object against the kind schemas."""
    if not isinstance(doc, dict):
        raise RecordError("record is not a JSON object")
    missing = [k for k in RECORD_KEYS if k not in doc]
    if missing:
        raise RecordError(f"missing key {missing[0]}")
    extra = sorted(set(doc) - set(RECORD_KEYS))
    if extra:
        raise RecordError(f"unknown key {extra[0]}")
    rid = doc["record_id"]
    if not isinstance(rid, str) or not rid:
        raise RecordError("record_id must be a non-empty string")
    kind = doc["kind"]
    schema = KIND_SCHEMAS.get(kind) if isinstance(kind, str) else None
    if schema is None:
        raise RecordError("unknown kind")
    try:
        ts = parse_timestamp(doc["timestamp"])
    except ValueError as exc:
        raise RecordError(f"bad timestamp: {exc}") from None
    attrs = doc["attributes"]
    if not isinstance(attrs, dict):
        raise RecordError("attributes must be an object")
    extra = sorted(set(attrs) - set(schema.field_names))
    if extra:
        raise RecordError(f"unknown attribute {extra[0]} for kind {kind}")
    clean: dict[str, AttrValue] = {}
    for fs in schema.fields:
        if fs.name not in attrs:
            raise RecordError(f"missing attribute {fs.name} for kind {kind}")
        v = attrs[fs.name]
        if fs.type == DECIMAL:
            if not isinstance(v, Decimal) or not v.is_finite():
                raise RecordError(f"attribute {fs.name} must be a number")
            if canon.fractional_digits(v) > canon.PLACES:
                raise RecordError(f"attribute {fs.name} has more than 6 fractional digits")
        else:
            if not isinstance(v, str):
                raise RecordError(f"attribute {fs.name} must be text")
            if fs.allowed is not None and v not in fs.allowed:
                allowed = ", ".join(sorted(fs.allowed))
                raise RecordError(f"attribute {fs.name} must be one of {allowed}")
        clean[fs.name] = v
    return EvidenceRecord(rid, kind, ts, MappingProxyType(clean))


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK
    return h


def digest_records(records: Iterable[EvidenceRecord]) -> str:
    """FNV-1a 64 over canonical record lines sorted by record_id, as 16 hex chars."""
    h = FNV_OFFSET
    for r in sorted(records, key=lambda r: r.record_id):
        h = fnv1a64((r.canonical_line() + "\n").encode("utf-8"), h)
    return f"{h:016x}"


# -- store ------------------------------------------------------------------


@dataclass
class IngestSummary:
    accepted: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[tuple[int, str]] = field(default_factory=list)


class PeriodView:
    """Read-only evidence of one period, grouped by kind."""

    def __init__(self, records: Iterable[EvidenceRecord]):
        self._by_kind: dict[str, list[EvidenceRecord]] = {}
        for r in records:
            self._by_kind.setdefault(r.kind, []).append(r)

    def select(self, kind: str, predicates: Sequence[Predicate] = ()) -> list[EvidenceRecord]:
        return [
            r
            for r in self._by_kind.get(kind, ())
            if all(p.matches(r.attributes[p.field]) for p in predicates)
        ]


class EvidenceStore:
    """Period-partitioned evidence. With ``root`` set, ingests persist to disk."""

    def __init__(self, policy: PeriodPolicy, root: Path | None = None):
        self.policy = policy
        self.root = Path(root) if root is not None else None
        self._partitions: dict[str, dict[str, EvidenceRecord]] = {}
        self._index: dict[str, str] = {}

    @classmethod
    def open(cls, root, policy: PeriodPolicy, create: bool = False) -> "EvidenceStore":
        root = Path(root)
        if not root.is_dir():
            if not create:
                raise StoreError(f"store directory {root} does not exist")
            root.mkdir(parents=True)
        store = cls(policy, root)
        meta_path = root / "store.json"
        if meta_path.exists():
            meta = canon.loads(meta_path.read_text(encoding="utf-8"))
            stored = PeriodPolicy(meta["granularity"], meta["timezone_rule"])
            if stored != policy:
                raise StoreError(
                    f"store {root} uses period policy {stored.granularity} "
                    f"{stored.timezone_rule}, plan wants {policy.granularity} {policy.timezone_rule}"
                )
        elif create:
            meta = {"granularity": policy.granularity, "timezone_rule": policy.timezone_rule}
            meta_path.write_text(canon.dumps(meta), encoding="utf-8")
        else:
            raise StoreError(f"{root} is not an evidence store (no store.json)")
        store._load()
        return store

    def _load(self) -> None:
        self._partitions.clear()
        self._index.clear()
        for path in sorted(self.root.glob("*.ndjson")):
            period = path.stem
            try:
                lines = path.read_text(encoding="utf-8").splitlines()
            except (OSError, UnicodeDecodeError) as exc:
                raise StoreError(f"cannot read {path}: {exc}") from exc
            for n, line in enumerate(lines, 1):
                try:
                    rec = record_from_doc(canon.loads(line))
                except ValueError as exc:
                    raise StoreError(f"{path}:{n}: corrupt record: {exc}") from exc
                if rec.record_id in self._index or assign_period(rec.timestamp, self.policy) != period:
                    raise StoreError(f"{path}:{n}: record {rec.record_id} misplaced or duplicated")
                self._add(rec, period)

    def _add(self, rec: EvidenceRecord, period: str) -> None:
        self._partitions.setdefault(period, {})[rec.record_id] = rec
        self._index[rec.record_id] = period

    def __len__(self) -> int:
        return len(self._index)

    def periods(self) -> list[str]:
        return sorted(self._partitions)

    def period_of(self, record_id: str) -> str | None:
        return self._index.get(record_id)

    def records(self, period: str) -> list[EvidenceRecord]:
        part = self._partitions.get(period, {})
        return [part[k] for k in sorted(part)]

    def ingest(self, lines: Iterable[Union[str, bytes]], now: datetime | None = None) -> IngestSummary:
        """Validate and store newline-delimited JSON records.

        Bad lines are rejected with a reason; they never abort the ingest.
        """
        if self.root is None:
            return self._ingest(lines, now)
        with FileLock(str(self.root / ".lock")):
            self._load()
            before = dict(self._index)
            summary = self._ingest(lines, now)
            self._persist(before)
        return summary

    def _ingest(self, lines, now) -> IngestSummary:
        now = now or datetime.now(timezone.utc)
        summary = IngestSummary()
        for n, raw in enumerate(lines, 1):
            if isinstance(raw, bytes):
                try:
                    raw = raw.decode("utf-8")
                except UnicodeDecodeError:
                    summary.rejected.append((n, "invalid UTF-8"))
                    continue
            if not raw.strip():
                continue
            try:
                doc = canon.loads(raw)
            except ValueError as exc:
                summary.rejected.append((n, f"malformed JSON: {exc}"))
                continue
            try:
                rec = record_from_doc(doc)
            except RecordError as exc:
                summary.rejected.append((n, str(exc)))
                continue
            if rec.record_id in self._index:
                summary.rejected.append((n, "duplicate record_id"))
                continue
            if rec.timestamp > now:
                msg = f"timestamp of {rec.record_id} is in the future"
                logger.warning("line %d: %s", n, msg)
                summary.warnings.append((n, msg))
            self._add(rec, assign_period(rec.timestamp, self.policy))
            summary.accepted += 1
        return summary

    def _persist(self, before: Mapping[str, str]) -> None:
        new: dict[str, list[str]] = {}
        for rid, period in self._index.items():
            if rid not in before:
                new.setdefault(period, []).append(rid)
        for period, ids in sorted(new.items()):
            part = self._partitions[period]
            with open(self.root / f"{period}.ndjson", "a", encoding="utf-8", newline="\n") as fh:
                for rid in ids:
                    fh.write(part[rid].canonical_line() + "\n")
        index = "".join(f"{rid}\t{self._index[rid]}\n" for rid in sorted(self._index))
        (self.root / "index").write_text(index, encoding="utf-8", newline="\n")

    def query(
        self, kind: str, period: str, predicates: Sequence[Predicate] = ()
    ) -> frozenset[EvidenceRecord]:
        """Records of ``kind`` in ``period`` matching every predicate. Unknown periods are empty."""
        part = self._partitions.get(period, {})
        return frozenset(
            r
            for r in part.values()
            if r.kind == kind and all(p.matches(r.attributes[p.field]) for p in predicates)
        )

    def view(self, period: str) -> PeriodView:
        return PeriodView(self.records(period))

    def digest(self, period: str) -> str:
        return digest_records(self._partitions.get(period, {}).values())


def ingest_records(store: EvidenceStore, lines: Iterable[Union[str, bytes]]) -> IngestSummary:
    return store.ingest(lines)


def snapshot_digest(store: EvidenceStore, period: str) -> str:
    return store.digest(period)
