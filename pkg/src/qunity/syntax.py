"""Abstract syntax of Qunity: real constants, data types, expressions, programs.

All nodes are frozen dataclasses, so terms are hashable and compare
structurally.  The surface printer in this module produces text that the
parser in :mod:`qunity.parser` reads back to the identical AST.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Union


class DomainError(ValueError):
    """Raised when a real constant has no value (for example ``1 / 0``)."""


# ---------------------------------------------------------------------------
# Real constants
# ---------------------------------------------------------------------------

REAL_FUNCTIONS = ("sin", "cos", "tan", "arcsin", "arccos", "arctan", "exp", "ln", "sqrt")


@dataclass(frozen=True)
class RConst:
    """``pi`` or ``euler``."""

    name: str


@dataclass(frozen=True)
class RNat:
    n: int


@dataclass(frozen=True)
class RNeg:
    arg: "RealExpr"


@dataclass(frozen=True)
class RBin:
    """Binary arithmetic; ``op`` is one of ``+ * /``."""

    op: str
    left: "RealExpr"
    right: "RealExpr"


@dataclass(frozen=True)
class RFun:
    fn: str
    arg: "RealExpr"


RealExpr = Union[RConst, RNat, RNeg, RBin, RFun]

PI = RConst("pi")


def eval_real(r: RealExpr) -> float:
    """Evaluate a real constant to a float, raising DomainError when undefined."""
    if isinstance(r, RConst):
        if r.name == "pi":
            return math.pi
        if r.name == "euler":
            return math.e
        raise DomainError(f"unknown constant {r.name}")
    if isinstance(r, RNat):
        return float(r.n)
    if isinstance(r, RNeg):
        return -eval_real(r.arg)
    if isinstance(r, RBin):
        a, b = eval_real(r.left), eval_real(r.right)
        if r.op == "+":
            return a + b
        if r.op == "*":
            return a * b
        if r.op == "/":
            if b == 0.0:
                raise DomainError("division by zero")
            return a / b
        raise DomainError(f"unknown operator {r.op}")
    if isinstance(r, RFun):
        x = eval_real(r.arg)
        fn = r.fn
        if fn in ("arcsin", "arccos") and not -1.0 <= x <= 1.0:
            raise DomainError(f"{fn} argument {x} outside [-1, 1]")
        if fn == "ln" and x <= 0.0:
            raise DomainError(f"ln of non-positive value {x}")
        if fn == "sqrt" and x < 0.0:
            raise DomainError(f"sqrt of negative value {x}")
        if fn == "tan" and math.isclose(math.cos(x), 0.0, abs_tol=1e-300):
            raise DomainError("tan undefined")
        table = {
            "sin": math.sin, "cos": math.cos, "tan": math.tan,
            "arcsin": math.asin, "arccos": math.acos, "arctan": math.atan,
            "exp": math.exp, "ln": math.log, "sqrt": math.sqrt,
        }
        try:
            return table[fn](x)
        except OverflowError as exc:
            raise DomainError(f"{fn} overflow") from exc
        except KeyError as exc:
            raise DomainError(f"unknown function {fn}") from exc
    raise TypeError(f"not a real expression: {r!r}")


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TVoid:
    pass


@dataclass(frozen=True)
class TUnit:
    pass


@dataclass(frozen=True)
class TSum:
    left: "DataType"
    right: "DataType"


@dataclass(frozen=True)
class TProd:
    left: "DataType"
    right: "DataType"


DataType = Union[TVoid, TUnit, TSum, TProd]

VOID = TVoid()
UNIT = TUnit()
BIT = TSum(UNIT, UNIT)


@dataclass(frozen=True)
class Coherent:
    """Program type ``T ~> T'`` (pure)."""

    dom: DataType
    cod: DataType


@dataclass(frozen=True)
class Channel:
    """Program type ``T => T'`` (mixed)."""

    dom: DataType
    cod: DataType


ProgType = Union[Coherent, Channel]


# ---------------------------------------------------------------------------
# Expressions and programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EUnit:
    pass


@dataclass(frozen=True)
class EVar:
    name: str


@dataclass(frozen=True)
class EPair:
    first: "Expr"
    second: "Expr"


@dataclass(frozen=True)
class ECtrl:
    scrutinee: "Expr"
    stype: DataType
    branches: tuple  # tuple[tuple[Expr, Expr], ...]
    rtype: DataType


@dataclass(frozen=True)
class ETry:
    body: "Expr"
    handler: "Expr"


@dataclass(frozen=True)
class EApp:
    prog: "Prog"
    arg: "Expr"


Expr = Union[EUnit, EVar, EPair, ECtrl, ETry, EApp]


@dataclass(frozen=True)
class PU3:
    theta: RealExpr
    phi: RealExpr
    lam: RealExpr


@dataclass(frozen=True)
class PLeft:
    t0: DataType
    t1: DataType


@dataclass(frozen=True)
class PRight:
    t0: DataType
    t1: DataType


@dataclass(frozen=True)
class PAbs:
    pattern: "Expr"
    dtype: DataType
    body: "Expr"


@dataclass(frozen=True)
class PRphase:
    dtype: DataType
    pattern: "Expr"
    r_match: RealExpr
    r_other: RealExpr


Prog = Union[PU3, PLeft, PRight, PAbs, PRphase]

EXPR_TYPES = (EUnit, EVar, EPair, ECtrl, ETry, EApp)
PROG_TYPES = (PU3, PLeft, PRight, PAbs, PRphase)
TYPE_TYPES = (TVoid, TUnit, TSum, TProd)


def is_expr(x: object) -> bool:
    return isinstance(x, EXPR_TYPES)


def is_prog(x: object) -> bool:
    return isinstance(x, PROG_TYPES)


def free_vars(e: Expr) -> frozenset:
    """All variable names occurring in ``e``.

    Patterns do not bind at this level, so ctrl pattern variables are included.
    Programs are closed and are not descended into.
    """
    return frozenset(_iter_vars(e))


def _iter_vars(e: Expr) -> Iterator[str]:
    if isinstance(e, EVar):
        yield e.name
    elif isinstance(e, EPair):
        yield from _iter_vars(e.first)
        yield from _iter_vars(e.second)
    elif isinstance(e, ECtrl):
        yield from _iter_vars(e.scrutinee)
        for p, b in e.branches:
            yield from _iter_vars(p)
            yield from _iter_vars(b)
    elif isinstance(e, ETry):
        yield from _iter_vars(e.body)
        yield from _iter_vars(e.handler)
    elif isinstance(e, EApp):
        yield from _iter_vars(e.arg)


def needed_vars(e: Expr) -> frozenset:
    """Variables that must be bound by the context to type ``e``.

    Unlike :func:`free_vars`, variables bound by a ctrl branch pattern are
    removed from the corresponding branch body.
    """
    if isinstance(e, EVar):
        return frozenset((e.name,))
    if isinstance(e, EPair):
        return needed_vars(e.first) | needed_vars(e.second)
    if isinstance(e, ECtrl):
        out = set(needed_vars(e.scrutinee))
        for p, b in e.branches:
            out |= needed_vars(b) - free_vars(p)
        return frozenset(out)
    if isinstance(e, ETry):
        return needed_vars(e.body) | needed_vars(e.handler)
    if isinstance(e, EApp):
        return needed_vars(e.arg)
    return frozenset()


def vars_in_order(e: Expr) -> list:
    """Variables of ``e`` in order of first occurrence (used for pattern contexts)."""
    seen: list = []
    for name in _iter_vars(e):
        if name not in seen:
            seen.append(name)
    return seen


def has_quantum_primitive(term) -> bool:
    """True if a u3 or rphase occurs anywhere in ``term`` (including nested programs)."""
    if isinstance(term, (PU3, PRphase)):
        return True
    if isinstance(term, PAbs):
        return has_quantum_primitive(term.pattern) or has_quantum_primitive(term.body)
    if isinstance(term, (PLeft, PRight, EUnit, EVar)):
        return False
    if isinstance(term, EPair):
        return has_quantum_primitive(term.first) or has_quantum_primitive(term.second)
    if isinstance(term, ECtrl):
        if has_quantum_primitive(term.scrutinee):
            return True
        return any(has_quantum_primitive(p) or has_quantum_primitive(b) for p, b in term.branches)
    if isinstance(term, ETry):
        return has_quantum_primitive(term.body) or has_quantum_primitive(term.handler)
    if isinstance(term, EApp):
        return has_quantum_primitive(term.prog) or has_quantum_primitive(term.arg)
    raise TypeError(f"not a term: {term!r}")


# ---------------------------------------------------------------------------
# Printing (ASCII surface syntax, re-parsable)
# ---------------------------------------------------------------------------


def show_real(r: RealExpr) -> str:
    if isinstance(r, RConst):
        return r.name
    if isinstance(r, RNat):
        return str(r.n)
    if isinstance(r, RNeg):
        return f"(-{show_real(r.arg)})"
    if isinstance(r, RBin):
        return f"({show_real(r.left)} {r.op} {show_real(r.right)})"
    if isinstance(r, RFun):
        return f"{r.fn}({show_real(r.arg)})"
    raise TypeError(r)


def show_type(t: DataType) -> str:
    if isinstance(t, TVoid):
        return "Void"
    if isinstance(t, TUnit):
        return "()"
    if t == BIT:
        return "Bit"
    if isinstance(t, TSum):
        return f"({show_type(t.left)} (+) {show_type(t.right)})"
    if isinstance(t, TProd):
        return f"({show_type(t.left)} (x) {show_type(t.right)})"
    raise TypeError(t)


def show_progtype(f: ProgType) -> str:
    arrow = "~>" if isinstance(f, Coherent) else "=>"
    return f"{show_type(f.dom)} {arrow} {show_type(f.cod)}"


def show_expr(e: Expr) -> str:
    if isinstance(e, EUnit):
        return "()"
    if isinstance(e, EVar):
        return e.name
    if isinstance(e, EPair):
        return f"({show_expr(e.first)}, {show_expr(e.second)})"
    if isinstance(e, ECtrl):
        arms = " | ".join(f"{show_expr(p)} -> {show_expr(b)}" for p, b in e.branches)
        return (f"(ctrl {show_expr(e.scrutinee)} : {show_type(e.stype)} "
                f"{{{arms}}} : {show_type(e.rtype)})")
    if isinstance(e, ETry):
        return f"(try {show_expr(e.body)} catch {show_expr(e.handler)})"
    if isinstance(e, EApp):
        return f"({show_prog(e.prog)} {show_expr(e.arg)})"
    raise TypeError(e)


def show_prog(f: Prog) -> str:
    if isinstance(f, PU3):
        return f"u3({show_real(f.theta)}, {show_real(f.phi)}, {show_real(f.lam)})"
    if isinstance(f, PLeft):
        return f"left[{show_type(f.t0)}, {show_type(f.t1)}]"
    if isinstance(f, PRight):
        return f"right[{show_type(f.t0)}, {show_type(f.t1)}]"
    if isinstance(f, PAbs):
        return f"(lambda {show_expr(f.pattern)} : {show_type(f.dtype)} -> {show_expr(f.body)})"
    if isinstance(f, PRphase):
        return (f"rphase[{show_type(f.dtype)}]({show_expr(f.pattern)}, "
                f"{show_real(f.r_match)}, {show_real(f.r_other)})")
    raise TypeError(f)


def show(term) -> str:
    """Print any syntax node (types, expressions, programs, reals) in surface syntax."""
    if isinstance(term, TYPE_TYPES):
        return show_type(term)
    if isinstance(term, EXPR_TYPES):
        return show_expr(term)
    if isinstance(term, PROG_TYPES):
        return show_prog(term)
    if isinstance(term, (Coherent, Channel)):
        return show_progtype(term)
    return show_real(term)
