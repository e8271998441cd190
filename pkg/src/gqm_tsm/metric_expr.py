"""Metric formula language: tokenizer, parser, printer, typechecker, evaluator.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := NUMBER | call | "(" expr ")"
    call   := NAME "(" args ")"

Built-in calls::

    param("name")                      plan parameter value
    count(kind, pred...)               number of matching records
    sum(kind, field, pred...)          sum of a numeric field
    distinct(kind, field, pred...)     number of distinct field values
    ratio(expr, expr)                  quotient, undefined when the divisor is 0

A predicate is ``field OP literal`` with OP one of ``== != < <= > >=``.
Several predicates in one call are conjoined.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Mapping, Protocol, Sequence, Union

from .canon import Number, format_number, to_fraction
from .schema import DECIMAL, KIND_SCHEMAS, TEXT, KindSchema

COMPARISONS = ("==", "!=", "<=", ">=", "<", ">")
TEXT_COMPARISONS = ("==", "!=")


class ExprSyntaxError(ValueError):
    """Raised when formula text cannot be parsed."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at column {position}")
        self.message = message
        self.position = position


# -- tree -------------------------------------------------------------------


@dataclass(frozen=True)
class NumberLit:
    value: Decimal


@dataclass(frozen=True)
class ParamRef:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Name:
    """A bare identifier argument: an evidence kind or a field."""

    ident: str


@dataclass(frozen=True)
class Predicate:
    field: str
    op: str
    literal: Union[Decimal, str]

    def matches(self, value: Union[Decimal, str]) -> bool:
        lit = self.literal
        if isinstance(lit, str) or isinstance(value, str):
            if self.op == "==":
                return value == lit
            if self.op == "!=":
                return value != lit
            return False
        return _compare(value, self.op, lit)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[NumberLit, ParamRef, BinOp, Call]


def _compare(a, op: str, b) -> bool:
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


# name -> (leading identifier args, accepts trailing predicates)
AGGREGATES = {"count": 1, "sum": 2, "distinct": 2}
FUNCTIONS = ("count", "sum", "distinct", "ratio", "param")


# -- tokenizer --------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|<|>|[-+*/(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int  # 1-based column


def tokenize(src: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", i + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), i + 1))
        i = m.end()
    tokens.append(Token("eof", "", len(src) + 1))
    return tokens


# -- parser -----------------------------------------------------------------


class _Parser:
    def __init__(self, src: str):
        self.tokens = tokenize(src)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind == "string":
            self.fail(f"expected {text!r}")
        return self.advance()

    def fail(self, what: str):
        shown = self.tok.text or "end of input"
        raise ExprSyntaxError(f"{what}, got unexpected token {shown!r}", self.tok.pos)

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            self.fail("expected operator or end of input")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            left = BinOp(op, left, self.factor())
        return left

    def factor(self) -> Expr:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return NumberLit(Decimal(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "name":
            return self.call()
        self.fail("expected number, call or '('")

    def call(self) -> Expr:
        name_tok = self.advance()
        func = name_tok.text
        if func not in FUNCTIONS:
            raise ExprSyntaxError(f"unknown function {func!r}", name_tok.pos)
        self.expect("(")
        if func == "param":
            tok = self.tok
            if tok.kind != "string":
                self.fail("param() takes a quoted parameter name")
            self.advance()
            self.expect(")")
            return ParamRef(json.loads(tok.text))
        if func == "ratio":
            a = self.expr()
            self.expect(",")
            b = self.expr()
            if self.tok.text == ",":
                raise ExprSyntaxError("bad arity: ratio takes 2 arguments", self.tok.pos)
            self.expect(")")
            return Call("ratio", (a, b))
        args: list = []
        for n in range(AGGREGATES[func]):
            if n:
                if self.tok.text != ",":
                    raise ExprSyntaxError(
                        f"bad arity: {func} takes at least {AGGREGATES[func]} arguments",
                        self.tok.pos,
                    )
                self.advance()
            if self.tok.kind != "name":
                self.fail(f"{func}() expects an identifier")
            args.append(Name(self.advance().text))
        while self.tok.text == ",":
            self.advance()
            args.append(self.predicate())
        self.expect(")")
        return Call(func, tuple(args))

    def predicate(self) -> Predicate:
        if self.tok.kind != "name":
            self.fail("expected predicate field name")
        field = self.advance().text
        if self.tok.text not in COMPARISONS:
            self.fail("expected comparison operator")
        op = self.advance().text
        tok = self.tok
        if tok.kind == "string":
            self.advance()
            return Predicate(field, op, json.loads(tok.text))
        negative = False
        if tok.text == "-":
            negative = True
            self.advance()
            tok = self.tok
        if tok.kind != "number":
            self.fail("expected literal")
        self.advance()
        value = Decimal(tok.text)
        return Predicate(field, op, -value if negative else value)


def parse_expr(src: str) -> Expr:
    """Parse formula text into an expression tree."""
    return _Parser(src).parse()


# -- printer ----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e: Expr) -> int:
    return _PREC[e.op] if isinstance(e, BinOp) else 3


def _literal(lit: Union[Decimal, str]) -> str:
    if isinstance(lit, str):
        return json.dumps(lit, ensure_ascii=False)
    return _decimal_text(lit)


def _decimal_text(d: Decimal) -> str:
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def print_expr(e: Expr) -> str:
    """Canonical formula text with the fewest parentheses that keep the tree."""
    if isinstance(e, NumberLit):
        return _decimal_text(e.value)
    if isinstance(e, ParamRef):
        return f"param({json.dumps(e.name, ensure_ascii=False)})"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left = print_expr(e.left)
        if _prec(e.left) < p:
            left = f"({left})"
        right = print_expr(e.right)
        # same-precedence right operands need parens to keep the tree shape
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    parts = []
    for a in e.args:
        if isinstance(a, Name):
            parts.append(a.ident)
        elif isinstance(a, Predicate):
            parts.append(f"{a.field} {a.op} {_literal(a.literal)}")
        else:
            parts.append(print_expr(a))
    return f"{e.func}({', '.join(parts)})"


# -- analysis helpers -------------------------------------------------------


def walk(e: Expr) -> Iterable[Expr]:
    yield e
    if isinstance(e, BinOp):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            if not isinstance(a, (Name, Predicate)):
                yield from walk(a)


def parameters_used(e: Expr) -> list[str]:
    seen: dict[str, None] = {}
    for node in walk(e):
        if isinstance(node, ParamRef):
            seen.setdefault(node.name)
    return list(seen)


def kinds_used(e: Expr) -> list[str]:
    seen: dict[str, None] = {}
    for node in walk(e):
        if isinstance(node, Call) and node.func in AGGREGATES:
            seen.setdefault(node.args[0].ident)
    return list(seen)


# -- typechecker ------------------------------------------------------------


@dataclass(frozen=True)
class ExprTypeError:
    """One typechecking problem.

    ``category`` is ``"parameter"`` for references to undefined plan
    parameters, ``"evidence"`` for unknown or undeclared kinds and fields,
    and ``"type"`` for comparisons that do not fit the field type.
    """

    category: str
    message: str

    def __str__(self) -> str:
        return self.message


def typecheck(
    e: Expr,
    parameters: Iterable[str],
    schema: Mapping[str, KindSchema] = KIND_SCHEMAS,
    kinds: Iterable[str] | None = None,
) -> list[ExprTypeError]:
    """Check references and field types. An empty list means the formula is sound.

    ``kinds``, when given, restricts which evidence kinds the formula may read.
    """
    params = set(parameters)
    allowed = set(kinds) if kinds is not None else None
    errors: list[ExprTypeError] = []
    for node in walk(e):
        if isinstance(node, ParamRef):
            if node.name not in params:
                errors.append(ExprTypeError("parameter", f"undefined parameter {node.name!r}"))
        elif isinstance(node, Call) and node.func in AGGREGATES:
            errors.extend(_check_aggregate(node, schema, allowed))
    return errors


def _check_aggregate(node: Call, schema, allowed) -> list[ExprTypeError]:
    kind = node.args[0].ident
    ks = schema.get(kind)
    if ks is None:
        return [ExprTypeError("evidence", f"unknown evidence kind {kind!r}")]
    errors = []
    if allowed is not None and kind not in allowed:
        errors.append(
            ExprTypeError("evidence", f"evidence kind {kind!r} not declared in data_sources")
        )
    if node.func in ("sum", "distinct"):
        fname = node.args[1].ident
        fs = ks.field(fname)
        if fs is None:
            errors.append(ExprTypeError("evidence", f"unknown field {kind}.{fname}"))
        elif node.func == "sum" and fs.type != DECIMAL:
            errors.append(ExprTypeError("type", f"type mismatch: sum over text field {kind}.{fname}"))
    for pred in node.args[AGGREGATES[node.func]:]:
        fs = ks.field(pred.field)
        if fs is None:
            errors.append(ExprTypeError("evidence", f"unknown field {kind}.{pred.field}"))
        elif fs.type == TEXT:
            if not isinstance(pred.literal, str):
                errors.append(
                    ExprTypeError("type", f"type mismatch: text field {kind}.{pred.field} compared with number")
                )
            elif pred.op not in TEXT_COMPARISONS:
                errors.append(
                    ExprTypeError("type", f"type mismatch: operator {pred.op} on text field {kind}.{pred.field}")
                )
        elif isinstance(pred.literal, str):
            errors.append(
                ExprTypeError("type", f"type mismatch: numeric field {kind}.{pred.field} compared with text")
            )
    return errors


# -- evaluation -------------------------------------------------------------


@dataclass(frozen=True)
class Value:
    value: Fraction

    def __str__(self) -> str:
        return format_number(self.value)


@dataclass(frozen=True)
class Undefined:
    reason: str

    def __str__(self) -> str:
        return f"undefined: {self.reason}"


EvalOutcome = Union[Value, Undefined]


class EvidenceView(Protocol):
    def select(self, kind: str, predicates: Sequence[Predicate]) -> Iterable: ...


@dataclass(frozen=True)
class EvalContext:
    parameters: Mapping[str, Number]
    evidence: EvidenceView


class _Undef(Exception):
    pass


def evaluate(e: Expr, ctx: EvalContext) -> EvalOutcome:
    """Evaluate ``e`` exactly. Division by zero gives :class:`Undefined`, never an exception."""
    try:
        return Value(_eval(e, ctx))
    except _Undef as u:
        return Undefined(str(u))


def _divide(a: Fraction, b: Fraction) -> Fraction:
    if b == 0:
        raise _Undef(f"division {format_number(a)}/0")
    return a / b


def _eval(e: Expr, ctx: EvalContext) -> Fraction:
    if isinstance(e, NumberLit):
        return Fraction(e.value)
    if isinstance(e, ParamRef):
        return to_fraction(ctx.parameters[e.name])
    if isinstance(e, BinOp):
        a = _eval(e.left, ctx)
        b = _eval(e.right, ctx)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return _divide(a, b)
    if e.func == "ratio":
        return _divide(_eval(e.args[0], ctx), _eval(e.args[1], ctx))
    n = AGGREGATES[e.func]
    kind = e.args[0].ident
    records = ctx.evidence.select(kind, e.args[n:])
    if e.func == "count":
        return Fraction(sum(1 for _ in records))
    field = e.args[1].ident
    if e.func == "sum":
        return sum((Fraction(r.attributes[field]) for r in records), Fraction(0))
    return Fraction(len({r.attributes[field] for r in records}))
