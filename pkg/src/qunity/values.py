"""Values and valuations of data types, with their qubit encoding."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Sequence, Union

from .syntax import (
    DataType, EApp, EPair, EUnit, Expr, PLeft, PRight, TProd, TSum, TUnit, TVoid, UNIT,
)


@dataclass(frozen=True)
class UnitVal:
    pass


@dataclass(frozen=True)
class LeftVal:
    inner: "Value"


@dataclass(frozen=True)
class RightVal:
    inner: "Value"


@dataclass(frozen=True)
class PairVal:
    first: "Value"
    second: "Value"


Value = Union[UnitVal, LeftVal, RightVal, PairVal]

UNIT_VAL = UnitVal()
ZERO = LeftVal(UNIT_VAL)
ONE = RightVal(UNIT_VAL)

# A context is an ordered tuple of (name, type); a valuation is a tuple of values
# aligned with a context.
Context = tuple


def ctx_names(ctx: Context) -> list:
    return [name for name, _ in ctx]


def ctx_type(ctx: Context) -> DataType:
    """The data type whose Hilbert space equals that of the context."""
    types = [t for _, t in ctx]
    if not types:
        return UNIT
    out = types[-1]
    for t in reversed(types[:-1]):
        out = TProd(t, out)
    return out


@lru_cache(maxsize=None)
def cardinality(t: DataType) -> int:
    if isinstance(t, TVoid):
        return 0
    if isinstance(t, TUnit):
        return 1
    if isinstance(t, TSum):
        return cardinality(t.left) + cardinality(t.right)
    if isinstance(t, TProd):
        return cardinality(t.left) * cardinality(t.right)
    raise TypeError(t)


@lru_cache(maxsize=None)
def values_of(t: DataType) -> tuple:
    """Canonical ordered list of values: lefts before rights, pairs lexicographic."""
    if isinstance(t, TVoid):
        return ()
    if isinstance(t, TUnit):
        return (UNIT_VAL,)
    if isinstance(t, TSum):
        return tuple(LeftVal(v) for v in values_of(t.left)) + tuple(
            RightVal(v) for v in values_of(t.right))
    if isinstance(t, TProd):
        return tuple(PairVal(a, b) for a in values_of(t.left) for b in values_of(t.right))
    raise TypeError(t)


def value_index(t: DataType, v: Value) -> int:
    """Position of ``v`` in ``values_of(t)``."""
    if isinstance(t, TUnit) and isinstance(v, UnitVal):
        return 0
    if isinstance(t, TSum):
        if isinstance(v, LeftVal):
            return value_index(t.left, v.inner)
        if isinstance(v, RightVal):
            return cardinality(t.left) + value_index(t.right, v.inner)
    if isinstance(t, TProd) and isinstance(v, PairVal):
        return value_index(t.left, v.first) * cardinality(t.right) + value_index(t.right, v.second)
    raise ValueError(f"value {v!r} does not inhabit {t!r}")


def inhabits(v: Value, t: DataType) -> bool:
    try:
        value_index(t, v)
        return True
    except ValueError:
        return False


@lru_cache(maxsize=None)
def size(t: DataType) -> int:
    """Number of qubits used to encode a value of ``t``."""
    if isinstance(t, (TVoid, TUnit)):
        return 0
    if isinstance(t, TSum):
        return 1 + max(size(t.left), size(t.right))
    if isinstance(t, TProd):
        return size(t.left) + size(t.right)
    raise TypeError(t)


def encode(v: Value, t: DataType) -> str:
    """Bitstring encoding of ``v`` as an inhabitant of ``t`` (padding is trailing zeros)."""
    if isinstance(t, TUnit) and isinstance(v, UnitVal):
        return ""
    if isinstance(t, TSum):
        if isinstance(v, LeftVal):
            bits = "0" + encode(v.inner, t.left)
        elif isinstance(v, RightVal):
            bits = "1" + encode(v.inner, t.right)
        else:
            raise ValueError(f"value {v!r} does not inhabit {t!r}")
        return bits.ljust(size(t), "0")
    if isinstance(t, TProd) and isinstance(v, PairVal):
        return encode(v.first, t.left) + encode(v.second, t.right)
    raise ValueError(f"value {v!r} does not inhabit {t!r}")


@lru_cache(maxsize=None)
def encodings(t: DataType) -> tuple:
    """Encodings of ``values_of(t)`` in canonical order, as integers (first bit most significant)."""
    return tuple(int(encode(v, t), 2) if size(t) else 0 for v in values_of(t))


def valuations(ctx: Context) -> list:
    """All valuations of a context, in the canonical (lexicographic) order."""
    return [tuple(vs) for vs in product(*[values_of(t) for _, t in ctx])]


def ctx_dim(ctx: Context) -> int:
    d = 1
    for _, t in ctx:
        d *= cardinality(t)
    return d


def valuation_index(ctx: Context, vals: Sequence) -> int:
    idx = 0
    for (_, t), v in zip(ctx, vals):
        idx = idx * cardinality(t) + value_index(t, v)
    return idx


def value_to_expr(v: Value, t: DataType) -> Expr:
    """The closed expression denoting value ``v`` of type ``t``."""
    if isinstance(v, UnitVal):
        return EUnit()
    if isinstance(v, LeftVal) and isinstance(t, TSum):
        return EApp(PLeft(t.left, t.right), value_to_expr(v.inner, t.left))
    if isinstance(v, RightVal) and isinstance(t, TSum):
        return EApp(PRight(t.left, t.right), value_to_expr(v.inner, t.right))
    if isinstance(v, PairVal) and isinstance(t, TProd):
        return EPair(value_to_expr(v.first, t.left), value_to_expr(v.second, t.right))
    raise ValueError(f"value {v!r} does not inhabit {t!r}")


def expr_to_value(e: Expr, t: DataType) -> Value:
    """Read a closed value expression (unit, pairs, injections) as a Value of ``t``."""
    if isinstance(e, EUnit) and isinstance(t, TUnit):
        return UNIT_VAL
    if isinstance(e, EPair) and isinstance(t, TProd):
        return PairVal(expr_to_value(e.first, t.left), expr_to_value(e.second, t.right))
    if isinstance(e, EApp) and isinstance(t, TSum):
        if isinstance(e.prog, PLeft) and (e.prog.t0, e.prog.t1) == (t.left, t.right):
            return LeftVal(expr_to_value(e.arg, t.left))
        if isinstance(e.prog, PRight) and (e.prog.t0, e.prog.t1) == (t.left, t.right):
            return RightVal(expr_to_value(e.arg, t.right))
    raise ValueError("expression is not a value of the expected type")


def show_value(v: Value, t: DataType | None = None) -> str:
    """Compact printing: Bit values as 0/1, pairs as tuples, injections as left/right."""
    if isinstance(v, UnitVal):
        return "()"
    if isinstance(v, PairVal):
        a = show_value(v.first, t.left if isinstance(t, TProd) else None)
        b = show_value(v.second, t.right if isinstance(t, TProd) else None)
        return f"({a}, {b})"
    if isinstance(v, LeftVal) and isinstance(v.inner, UnitVal) and (t is None or t == TSum(UNIT, UNIT)):
        return "0"
    if isinstance(v, RightVal) and isinstance(v.inner, UnitVal) and (t is None or t == TSum(UNIT, UNIT)):
        return "1"
    if isinstance(v, LeftVal):
        return f"left {show_value(v.inner, t.left if isinstance(t, TSum) else None)}"
    return f"right {show_value(v.inner, t.right if isinstance(t, TSum) else None)}"
