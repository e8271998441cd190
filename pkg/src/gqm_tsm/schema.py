"""Evidence kinds and the attributes each kind must carry."""

from __future__ import annotations

from dataclasses import dataclass

TEXT = "text"
DECIMAL = "decimal"

BOOL_TEXT = frozenset({"true", "false"})


@dataclass(frozen=True)
class FieldSpec:
    name: str
    type: str
    allowed: frozenset[str] | None = None


@dataclass(frozen=True)
class KindSchema:
    kind: str
    fields: tuple[FieldSpec, ...]

    def field(self, name: str) -> FieldSpec | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None

    @property
    def field_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.fields)


def _kind(kind: str, *fields: FieldSpec) -> KindSchema:
    names = [f.name for f in fields]
    assert len(names) == len(set(names)), kind
    return KindSchema(kind, tuple(fields))


KIND_SCHEMAS: dict[str, KindSchema] = {
    s.kind: s
    for s in (
        _kind("incident", FieldSpec("severity", TEXT), FieldSpec("source", TEXT)),
        _kind("audit_log_review"),
        _kind("assessment", FieldSpec("assessor_trained", TEXT, BOOL_TEXT)),
        _kind("corrective_action", FieldSpec("status", TEXT)),
        _kind(
            "security_update",
            FieldSpec("result", TEXT, frozenset({"success", "failure"})),
            FieldSpec("target", TEXT),
        ),
        _kind("maintenance"),
        _kind("personnel", FieldSpec("role", TEXT)),
        _kind("training", FieldSpec("course", TEXT), FieldSpec("attendee", TEXT)),
        _kind(
            "password_audit",
            FieldSpec("policy_compliant", TEXT, BOOL_TEXT),
            FieldSpec("crack_time_hours", DECIMAL),
            FieldSpec("shared", TEXT, BOOL_TEXT),
            FieldSpec("source", TEXT),
        ),
        _kind("access_control", FieldSpec("method", TEXT)),
        _kind(
            "survey_response",
            FieldSpec("understood", TEXT, BOOL_TEXT),
            FieldSpec("subject", TEXT),
        ),
    )
}

KINDS: tuple[str, ...] = tuple(KIND_SCHEMAS)
