"""Independent reference evaluator and random generators for formula tests.

The oracle walks the tree naively and scans a plain list of dict records for
every aggregate. It shares only the tree node classes with the package.
"""

from __future__ import annotations

import random
from decimal import Decimal
from fractions import Fraction

from gqm_tsm.metric_expr import BinOp, Call, Name, NumberLit, ParamRef, Predicate

UNDEFINED = "undefined"

# small schema subset used by the random generators; mirrors the evidence kinds
KINDS = {
    "password_audit": {
        "policy_compliant": ("text", ["true", "false"]),
        "crack_time_hours": ("num", None),
        "shared": ("text", ["true", "false"]),
        "source": ("text", ["manual", "scanner"]),
    },
    "security_update": {
        "result": ("text", ["success", "failure"]),
        "target": ("text", ["firewall", "ids", "vpn_gateway"]),
    },
    "incident": {
        "severity": ("text", ["low", "medium", "high"]),
        "source": ("text", ["ids", "ips", "user_report"]),
    },
}
PARAMS = {"asset_value": Decimal("5"), "threat": Decimal("0.6"), "vuln": Decimal("0.4"), "k": Decimal("0"), "big": Decimal("12.5")}


def _cmp(a, op, b):
    return {
        "==": lambda: a == b,
        "!=": lambda: a != b,
        "<": lambda: a < b,
        "<=": lambda: a <= b,
        ">": lambda: a > b,
        ">=": lambda: a >= b,
    }[op]()


def _matching(records, kind, preds):
    out = []
    for rec in records:
        if rec["kind"] != kind:
            continue
        ok = True
        for p in preds:
            v = rec["attributes"][p.field]
            if isinstance(v, str) or isinstance(p.literal, str):
                ok = ok and (v == p.literal if p.op == "==" else v != p.literal if p.op == "!=" else False)
            else:
                ok = ok and _cmp(Fraction(v), p.op, Fraction(p.literal))
        if ok:
            out.append(rec)
    return out


def oracle_eval(e, params, records):
    """Return a Fraction, or the string ``"undefined"``."""
    if isinstance(e, NumberLit):
        return Fraction(e.value)
    if isinstance(e, ParamRef):
        return Fraction(params[e.name])
    if isinstance(e, BinOp):
        a = oracle_eval(e.left, params, records)
        b = oracle_eval(e.right, params, records)
        if a == UNDEFINED or b == UNDEFINED:
            return UNDEFINED
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return UNDEFINED if b == 0 else a / b
    assert isinstance(e, Call)
    if e.func == "ratio":
        a = oracle_eval(e.args[0], params, records)
        b = oracle_eval(e.args[1], params, records)
        if a == UNDEFINED or b == UNDEFINED or b == 0:
            return UNDEFINED
        return a / b
    kind = e.args[0].ident
    if e.func == "count":
        return Fraction(len(_matching(records, kind, e.args[1:])))
    field = e.args[1].ident
    hits = _matching(records, kind, e.args[2:])
    if e.func == "sum":
        total = Fraction(0)
        for r in hits:
            total += Fraction(r["attributes"][field])
        return total
    values = []
    for r in hits:
        if r["attributes"][field] not in values:
            values.append(r["attributes"][field])
    return Fraction(len(values))


def has_division(e) -> bool:
    if isinstance(e, BinOp):
        return e.op == "/" or has_division(e.left) or has_division(e.right)
    if isinstance(e, Call):
        return e.func == "ratio" or any(
            has_division(a) for a in e.args if not isinstance(a, (Name, Predicate))
        )
    return False


# -- random generation ------------------------------------------------------


def random_decimal(rng: random.Random, places: int = 2, hi: int = 20) -> Decimal:
    return Decimal(rng.randint(0, hi * 10**places)).scaleb(-places).normalize() if places else Decimal(rng.randint(0, hi))


def random_predicate(rng: random.Random, kind: str) -> Predicate:
    field = rng.choice(sorted(KINDS[kind]))
    ftype, vocab = KINDS[kind][field]
    if ftype == "text":
        return Predicate(field, rng.choice(["==", "!="]), rng.choice(vocab))
    return Predicate(field, rng.choice(["==", "!=", "<", "<=", ">", ">="]), random_decimal(rng, 1, 10))


def random_aggregate(rng: random.Random) -> Call:
    kind = rng.choice(sorted(KINDS))
    func = rng.choice(["count", "count", "sum", "distinct"])
    if func == "sum":
        kind = "password_audit"
        lead = [Name(kind), Name("crack_time_hours")]
    elif func == "distinct":
        lead = [Name(kind), Name(rng.choice(sorted(KINDS[kind])))]
    else:
        lead = [Name(kind)]
    preds = [random_predicate(rng, kind) for _ in range(rng.randint(0, 2))]
    return Call(func, tuple(lead + preds))


def random_expr(rng: random.Random, depth: int = 4):
    """Random tree of at most ``depth`` levels of operators and calls."""
    if depth <= 1 or rng.random() < 0.25:
        choice = rng.random()
        if choice < 0.3:
            return NumberLit(random_decimal(rng, rng.choice([0, 0, 1, 2])))
        if choice < 0.5:
            return ParamRef(rng.choice(sorted(PARAMS)))
        return random_aggregate(rng)
    if rng.random() < 0.2:
        return Call("ratio", (random_expr(rng, depth - 1), random_expr(rng, depth - 1)))
    op = rng.choice(["+", "-", "*", "/"])
    return BinOp(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1))


def random_records(rng: random.Random, max_records: int = 20, max_kinds: int = 3) -> list[dict]:
    kinds = rng.sample(sorted(KINDS), rng.randint(1, max_kinds))
    records = []
    for i in range(rng.randint(0, max_records)):
        kind = rng.choice(kinds)
        attrs = {}
        for field, (ftype, vocab) in sorted(KINDS[kind].items()):
            attrs[field] = rng.choice(vocab) if ftype == "text" else random_decimal(rng, 1, 10)
        records.append({"record_id": f"R{i:03d}", "kind": kind, "attributes": attrs})
    return records


def depth(e) -> int:
    if isinstance(e, BinOp):
        return 1 + max(depth(e.left), depth(e.right))
    if isinstance(e, Call) and e.func == "ratio":
        return 1 + max(depth(a) for a in e.args)
    return 1


# -- hand-enumerated classification table ------------------------------------
# (direction, excellent_at, acceptable_at, value, expected label); cuts are
# inclusive toward the better band.
CLASSIFY_TABLE = [
    ("higher_better", "0.9", "0.7", "1.0", "Excellent"),     # above excellent cut
    ("higher_better", "0.9", "0.7", "0.9", "Excellent"),     # at excellent cut
    ("higher_better", "0.9", "0.7", "0.8", "Acceptable"),    # between cuts
    ("higher_better", "0.9", "0.7", "0.7", "Acceptable"),    # at acceptable cut
    ("higher_better", "0.9", "0.7", "0.5", "Unacceptable"),  # below acceptable cut
    ("lower_better", "0.1", "0.3", "0.05", "Excellent"),     # below excellent cut
    ("lower_better", "0.1", "0.3", "0.1", "Excellent"),      # at excellent cut
    ("lower_better", "0.1", "0.3", "0.2", "Acceptable"),     # between cuts
    ("lower_better", "0.1", "0.3", "0.3", "Acceptable"),     # at acceptable cut
    ("lower_better", "0.1", "0.3", "0.5", "Unacceptable"),   # beyond acceptable cut
]
