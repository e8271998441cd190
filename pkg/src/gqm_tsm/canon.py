"""Canonical number rendering and canonical JSON output.

Every document this package writes goes through :func:`dumps` so that equal
inputs always give equal bytes. Object keys keep the order the caller built
them in (the fixed per-document key order), numbers never use exponents and
never carry trailing zeros.
"""

from __future__ import annotations

import json
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from typing import Any, Union

Number = Union[int, Decimal, Fraction]

#: Fractional digits kept when rendering a value.
PLACES = 6
_QUANTUM = Decimal(1).scaleb(-PLACES)


def to_fraction(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


def round_decimal(x: Number) -> Decimal:
    """Round ``x`` half-even to six fractional digits."""
    f = to_fraction(x)
    digits = len(str(abs(f.numerator))) + len(str(f.denominator)) + PLACES + 4
    with localcontext() as ctx:
        ctx.prec = digits
        d = Decimal(f.numerator) / Decimal(f.denominator)
        return d.quantize(_QUANTUM, rounding=ROUND_HALF_EVEN)


def format_number(x: Number) -> str:
    """Render a number in canonical decimal text: ``1.2``, ``7``, ``0.333333``."""
    d = round_decimal(x)
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("-0", ""):
        text = "0"
    return text


def fractional_digits(d: Decimal) -> int:
    exp = d.as_tuple().exponent
    return max(0, -exp) if isinstance(exp, int) else 0


def _encode(obj: Any, indent: int | None, level: int) -> str:
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (int, Decimal, Fraction)):
        return format_number(obj)
    if isinstance(obj, float):
        raise TypeError("floats are not canonical; convert to Decimal first")
    if isinstance(obj, dict):
        items = [(json.dumps(str(k), ensure_ascii=False), v) for k, v in obj.items()]
        if not items:
            return "{}"
        if indent is None:
            return "{" + ",".join(f"{k}:{_encode(v, None, 0)}" for k, v in items) + "}"
        pad = " " * (indent * (level + 1))
        body = ",\n".join(f"{pad}{k}: {_encode(v, indent, level + 1)}" for k, v in items)
        return "{\n" + body + "\n" + " " * (indent * level) + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if indent is None:
            return "[" + ",".join(_encode(v, None, 0) for v in obj) + "]"
        pad = " " * (indent * (level + 1))
        body = ",\n".join(pad + _encode(v, indent, level + 1) for v in obj)
        return "[\n" + body + "\n" + " " * (indent * level) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj: Any, indent: int | None = 2) -> str:
    """Serialize ``obj`` canonically. Indented output ends with a newline."""
    text = _encode(obj, indent, 0)
    return text + "\n" if indent is not None else text


def loads(text: str) -> Any:
    """Parse JSON keeping every number as :class:`~decimal.Decimal`."""
    return json.loads(text, parse_float=Decimal, parse_int=Decimal)
