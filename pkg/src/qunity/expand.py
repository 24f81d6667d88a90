"""Sort-directed elaboration of surface trees into base syntax.

The parser produces sort-agnostic nodes; :class:`Elaborator` turns them into
data types, expressions, programs, real constants or natural numbers
depending on where they occur.  All syntactic sugar (``Bit``, ``0``/``1``,
``had``, ``let``, ``|>``, tensor powers, ``gphase``, ``equals``, ...) is
eliminated here, so the output contains only base constructors.

User definitions act as macros.  A parameter bound to something that
evaluates to a natural number can be used in clause selection (``0`` /
``n+1``) and in real arithmetic; any other argument is elaborated lazily in
the caller's environment at the point of use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import syntax as S
from .parser import (
    Definition, SApp, SBin, SCtrl, SLambda, SLet, SMatch, SName, SNeg, SNode, SNum,
    SParen, SPow, STry, STuple, SUnit, SourceProgram, parse, parse_term,
)

TYPE, EXPR, PROG, REAL, NAT = "type", "expr", "prog", "real", "nat"

MAX_DEPTH = 500


class ExpansionError(ValueError):
    pass


@dataclass(frozen=True)
class Binding:
    """A macro parameter: the argument node, its environment, and its natural value if any."""

    node: SNode
    env: "Env"
    nat: Optional[int] = None


class Env:
    """Immutable mapping from parameter names to bindings."""

    __slots__ = ("_items",)

    def __init__(self, items: Optional[dict] = None):
        self._items = dict(items or {})

    def get(self, name: str) -> Optional[Binding]:
        return self._items.get(name)

    def extend(self, extra: dict) -> "Env":
        new = dict(self._items)
        new.update(extra)
        return Env(new)


EMPTY_ENV = Env()


def _fresh(base: str, avoid) -> str:
    if base not in avoid:
        return base
    k = 0
    while f"{base}{k}" in avoid:
        k += 1
    return f"{base}{k}"


def tensor_power_type(t: S.DataType, n: int) -> S.DataType:
    out: S.DataType = S.UNIT
    for _ in range(n):
        out = S.TProd(t, out)
    return out


def tensor_power_expr(e: S.Expr, n: int) -> S.Expr:
    out: S.Expr = S.EUnit()
    for _ in range(n):
        out = S.EPair(e, out)
    return out


def _chain(node: SNode, ops: tuple) -> list:
    """Flatten an unparenthesized chain of the given binary operators."""
    if isinstance(node, SBin) and node.op in ops:
        return _chain(node.left, ops) + _chain(node.right, ops)
    return [node]


HAD = S.PU3(S.RBin("/", S.PI, S.RNat(2)), S.RNat(0), S.PI)
BIT0 = S.EApp(S.PLeft(S.UNIT, S.UNIT), S.EUnit())
BIT1 = S.EApp(S.PRight(S.UNIT, S.UNIT), S.EUnit())


class Elaborator:
    def __init__(self, definitions: Optional[dict] = None):
        self.defs: dict = dict(definitions or {})
        self._stack: list = []
        self._memo: dict = {}

    # ------------------------------------------------------------------
    def elab(self, node: SNode, sort: str, env: Env = EMPTY_ENV):
        if isinstance(node, SParen):
            return self.elab(node.inner, sort, env)
        method = getattr(self, "_" + sort)
        return method(node, env)

    def _nat_or_none(self, node: SNode, env: Env) -> Optional[int]:
        try:
            return self._nat(node, env)
        except ExpansionError:
            return None

    # ------------------------------------------------------------------
    # Names: parameters, builtins, user definitions
    # ------------------------------------------------------------------
    def _name(self, node: SName, sort: str, env: Env, builtin):
        if node.targs is None and node.args is None:
            b = env.get(node.name)
            if b is not None:
                if sort == NAT:
                    if b.nat is None:
                        raise ExpansionError(f"parameter {node.name} is not a natural number")
                    return b.nat
                return self.elab(b.node, sort, b.env)
        if node.name in self.defs:
            return self._call(node, sort, env)
        result = builtin(node, env)
        if result is not None:
            return result
        raise ExpansionError(f"unknown {sort} name {node.name!r}")

    def _call(self, node: SName, sort: str, env: Env):
        d: Definition = self.defs[node.name]
        if node.targs is not None:
            raise ExpansionError(f"definition {node.name} takes no [type] arguments")
        args = node.args or ()
        if len(args) != d.arity:
            raise ExpansionError(f"{node.name} expects {d.arity} argument(s), got {len(args)}")
        nats = [self._nat_or_none(a, env) for a in args]
        for clause in d.clauses:
            binds = {}
            ok = True
            for p, a, n in zip(clause.params, args, nats):
                if p.literal is not None or p.offset:
                    want = p.literal if p.literal is not None else None
                    if n is None:
                        ok = False
                        break
                    if want is not None:
                        if n != want:
                            ok = False
                            break
                    else:
                        if n < p.offset:
                            ok = False
                            break
                        binds[p.name] = Binding(SNum(n - p.offset), EMPTY_ENV, n - p.offset)
                else:
                    binds[p.name] = Binding(a, env, n)
            if ok:
                break
        else:
            raise ExpansionError(f"no clause of {node.name} matches arguments {nats}")
        key = (node.name, tuple(nats), sort) if all(n is not None for n in nats) else None
        if key is not None and key in self._memo:
            return self._memo[key]
        frame = (node.name, tuple(nats))
        if len(self._stack) >= MAX_DEPTH:
            raise ExpansionError(f"expansion depth exceeded in {node.name}")
        if key is not None and frame in self._stack:
            raise ExpansionError(f"non-terminating recursion in {node.name}{tuple(nats)}")
        self._stack.append(frame)
        try:
            result = self.elab(clause.body, sort, Env(binds))
        finally:
            self._stack.pop()
        if key is not None:
            self._memo[key] = result
        return result

    # ------------------------------------------------------------------
    # Natural numbers
    # ------------------------------------------------------------------
    def _nat(self, node: SNode, env: Env) -> int:
        if isinstance(node, SParen):
            return self._nat(node.inner, env)
        if isinstance(node, SNum):
            return node.n
        if isinstance(node, SName):
            return self._name(node, NAT, env, lambda n, e: None)
        if isinstance(node, SBin) and node.op in ("+", "-", "*"):
            a, b = self._nat(node.left, env), self._nat(node.right, env)
            if node.op == "+":
                return a + b
            if node.op == "*":
                return a * b
            if a < b:
                raise ExpansionError("natural subtraction below zero")
            return a - b
        if isinstance(node, SPow):
            return self._nat(node.base, env) ** self._nat(node.exp, env)
        raise ExpansionError("expected a natural number")

    # ------------------------------------------------------------------
    # Real constants
    # ------------------------------------------------------------------
    def _real(self, node: SNode, env: Env) -> S.RealExpr:
        if isinstance(node, SParen):
            return self._real(node.inner, env)
        if isinstance(node, SNum):
            return S.RNat(node.n)
        if isinstance(node, SNeg):
            return S.RNeg(self._real(node.arg, env))
        if isinstance(node, SBin) and node.op in ("+", "-", "*", "/"):
            a, b = self._real(node.left, env), self._real(node.right, env)
            if node.op == "-":
                return S.RBin("+", a, S.RNeg(b))
            return S.RBin(node.op, a, b)
        if isinstance(node, SPow):
            # r^k with natural k: repeated multiplication
            k = self._nat(node.exp, env)
            base = self._real(node.base, env)
            out: S.RealExpr = S.RNat(1)
            for i in range(k):
                out = base if i == 0 else S.RBin("*", out, base)
            return out
        if isinstance(node, SName):
            b = env.get(node.name) if node.args is None and node.targs is None else None
            if b is not None and b.nat is not None:
                return S.RNat(b.nat)
            return self._name(node, REAL, env, self._real_builtin)
        raise ExpansionError("expected a real constant")

    def _real_builtin(self, node: SName, env: Env):
        if node.args is None and node.name in ("pi", "euler"):
            return S.RConst(node.name)
        if node.name in S.REAL_FUNCTIONS and node.args is not None and len(node.args) == 1:
            return S.RFun(node.name, self._real(node.args[0], env))
        return None

    # ------------------------------------------------------------------
    # Types
    # ------------------------------------------------------------------
    def _type(self, node: SNode, env: Env) -> S.DataType:
        if isinstance(node, SParen):
            return self._type(node.inner, env)
        if isinstance(node, SUnit):
            return S.UNIT
        if isinstance(node, SBin) and node.op in ("+", "(+)"):
            parts = [self._type(p, env) for p in _chain(node, ("+", "(+)"))]
            return _right_nest(parts, S.TSum)
        if isinstance(node, SBin) and node.op in ("*", "(x)"):
            parts = [self._type(p, env) for p in _chain(node, ("*", "(x)"))]
            return _right_nest(parts, S.TProd)
        if isinstance(node, SPow):
            return tensor_power_type(self._type(node.base, env), self._nat(node.exp, env))
        if isinstance(node, SName):
            return self._name(node, TYPE, env, self._type_builtin)
        raise ExpansionError("expected a data type")

    def _type_builtin(self, node: SName, env: Env):
        name = node.name
        if node.targs is None and node.args is None:
            table = {"Void": S.VOID, "Unit": S.UNIT, "Bit": S.BIT}
            return table.get(name)
        if name == "Maybe" and node.args is not None and len(node.args) == 1:
            return S.TSum(S.UNIT, self._type(node.args[0], env))
        return None

    # ------------------------------------------------------------------
    # Expressions
    # ------------------------------------------------------------------
    def _expr(self, node: SNode, env: Env) -> S.Expr:
        if isinstance(node, SParen):
            return self._expr(node.inner, env)
        if isinstance(node, SUnit):
            return S.EUnit()
        if isinstance(node, SNum):
            if node.n == 0:
                return BIT0
            if node.n == 1:
                return BIT1
            raise ExpansionError(f"numeral {node.n} is not an expression (only 0 and 1 are)")
        if isinstance(node, STuple):
            items = [self._expr(x, env) for x in node.items]
            out = items[-1]
            for x in reversed(items[:-1]):
                out = S.EPair(x, out)
            return out
        if isinstance(node, SApp):
            return S.EApp(self._prog(node.fn, env), self._expr(node.arg, env))
        if isinstance(node, SBin) and node.op == "|>":
            return S.EApp(self._prog(node.right, env), self._expr(node.left, env))
        if isinstance(node, SPow):
            return tensor_power_expr(self._expr(node.base, env), self._nat(node.exp, env))
        if isinstance(node, SCtrl):
            return S.ECtrl(
                self._expr(node.scrutinee, env), self._type(node.stype, env),
                tuple((self._expr(p, env), self._expr(b, env)) for p, b in node.branches),
                self._type(node.rtype, env))
        if isinstance(node, STry):
            return S.ETry(self._expr(node.body, env), self._expr(node.handler, env))
        if isinstance(node, SLet):
            fn = S.PAbs(self._expr(node.pattern, env), self._type(node.dtype, env),
                        self._expr(node.body, env))
            return S.EApp(fn, self._expr(node.value, env))
        if isinstance(node, SName):
            return self._name(node, EXPR, env, self._expr_builtin)
        raise ExpansionError("expected an expression")

    def _expr_builtin(self, node: SName, env: Env):
        name = node.name
        if node.targs is None and node.args is None:
            if name == "plus":
                return S.EApp(HAD, BIT0)
            if name == "minus":
                return S.EApp(HAD, BIT1)
            if name == "coin":
                return S.EApp(self._meas(S.BIT), S.EApp(HAD, BIT0))
            if name in S.REAL_FUNCTIONS or name in ("pi", "euler") or name[0].isupper():
                return None
            return S.EVar(name)
        if name == "nothing" and node.targs is not None and len(node.targs) == 1 and node.args is None:
            return S.EApp(S.PLeft(S.UNIT, self._type(node.targs[0], env)), S.EUnit())
        return None

    # ------------------------------------------------------------------
    # Programs
    # ------------------------------------------------------------------
    def _prog(self, node: SNode, env: Env) -> S.Prog:
        if isinstance(node, SParen):
            return self._prog(node.inner, env)
        if isinstance(node, SLambda):
            return S.PAbs(self._expr(node.pattern, env), self._type(node.dtype, env),
                          self._expr(node.body, env))
        if isinstance(node, SMatch):
            return self._match(node, env)
        if isinstance(node, SName):
            return self._name(node, PROG, env, self._prog_builtin)
        raise ExpansionError("expected a program")

    def _targs(self, node: SName, env: Env, n: int) -> list:
        if node.targs is None or len(node.targs) != n:
            raise ExpansionError(f"{node.name} expects {n} type argument(s) in [...]")
        return [self._type(t, env) for t in node.targs]

    def _args(self, node: SName, n: int) -> tuple:
        if node.args is None or len(node.args) != n:
            raise ExpansionError(f"{node.name} expects {n} argument(s) in (...)")
        return node.args

    @staticmethod
    def _meas(t: S.DataType) -> S.Prog:
        x = S.EVar("x")
        return S.PAbs(x, t, S.EApp(_fst(t, t, "x0", "x1"), S.EPair(x, x)))

    def _prog_builtin(self, node: SName, env: Env):
        name = node.name
        if name == "had" and node.targs is None and node.args is None:
            return HAD
        if name == "u3":
            a, b, c = self._args(node, 3)
            return S.PU3(self._real(a, env), self._real(b, env), self._real(c, env))
        if name in ("left", "right"):
            t0, t1 = self._targs(node, env, 2)
            return S.PLeft(t0, t1) if name == "left" else S.PRight(t0, t1)
        if name == "rphase":
            (t,) = self._targs(node, env, 1)
            e, r0, r1 = self._args(node, 3)
            return S.PRphase(t, self._expr(e, env), self._real(r0, env), self._real(r1, env))
        if name == "gphase":
            (t,) = self._targs(node, env, 1)
            (r,) = self._args(node, 1)
            rr = self._real(r, env)
            return S.PRphase(t, S.EVar("x"), rr, rr)
        if name == "reflect":
            (t,) = self._targs(node, env, 1)
            (e,) = self._args(node, 1)
            return S.PRphase(t, self._expr(e, env), S.RNat(0), S.PI)
        if name == "equals":
            (t,) = self._targs(node, env, 1)
            (e,) = self._args(node, 1)
            pat = self._expr(e, env)
            x = S.EVar(_fresh("x", S.free_vars(pat)))
            test = S.EApp(S.PAbs(pat, t, BIT1), x)
            return S.PAbs(x, t, S.ETry(test, BIT0))
        if name == "meas":
            (t,) = self._targs(node, env, 1)
            return self._meas(t)
        if name in ("fst", "snd"):
            t0, t1 = self._targs(node, env, 2)
            return _fst(t0, t1, "x0", "x1") if name == "fst" else _snd(t0, t1, "x0", "x1")
        if name == "just":
            (t,) = self._targs(node, env, 1)
            return S.PRight(S.UNIT, t)
        if name == "id":
            (t,) = self._targs(node, env, 1)
            return S.PAbs(S.EVar("x"), t, S.EVar("x"))
        if name == "adj":
            (t,) = self._targs(node, env, 1)
            (f,) = self._args(node, 1)
            return S.PAbs(S.EApp(self._prog(f, env), S.EVar("x")), t, S.EVar("x"))
        if name == "comp":
            (t,) = self._targs(node, env, 1)
            f, g = self._args(node, 2)
            x = S.EVar("x")
            return S.PAbs(x, t, S.EApp(self._prog(f, env), S.EApp(self._prog(g, env), x)))
        return None

    def _match(self, node: SMatch, env: Env) -> S.Prog:
        """``match[T, T'] {e_j -> e'_j}`` via specialized erasure.

        ``lambda x : T -> ctrl x : T {e_j -> (x, e'_j)} : T (x) T'
        |> lambda (ctrl y : T' {e'_j -> (e_j, y)} : T (x) T') : T (x) T' -> y``
        """
        if len(node.targs) != 2:
            raise ExpansionError("match expects [T, T']")
        t = self._type(node.targs[0], env)
        t2 = self._type(node.targs[1], env)
        branches = [(self._expr(p, env), self._expr(b, env)) for p, b in node.branches]
        used = set()
        for p, b in branches:
            used |= S.free_vars(p) | S.free_vars(b)
        x = S.EVar(_fresh("x", used))
        y = S.EVar(_fresh("y", used | {x.name}))
        both = S.TProd(t, t2)
        compute = S.ECtrl(x, t, tuple((p, S.EPair(x, b)) for p, b in branches), both)
        erase_pattern = S.ECtrl(y, t2, tuple((b, S.EPair(p, y)) for p, b in branches), both)
        return S.PAbs(x, t, S.EApp(S.PAbs(erase_pattern, both, y), compute))


def _right_nest(parts: list, ctor):
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = ctor(p, out)
    return out


def _fst(t0, t1, a, b) -> S.Prog:
    return S.PAbs(S.EPair(S.EVar(a), S.EVar(b)), S.TProd(t0, t1), S.EVar(a))


def _snd(t0, t1, a, b) -> S.Prog:
    return S.PAbs(S.EPair(S.EVar(a), S.EVar(b)), S.TProd(t0, t1), S.EVar(b))


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------


def expand_node(node: SNode, definitions: Optional[dict] = None, sort: Optional[str] = None):
    """Elaborate a node; with ``sort=None`` try expression, then program, then type."""
    el = Elaborator(definitions)
    if sort is not None:
        return el.elab(node, sort)
    errors = []
    for s in (EXPR, PROG, TYPE):
        try:
            return Elaborator(definitions).elab(node, s)
        except ExpansionError as exc:
            errors.append(f"as {s}: {exc}")
    raise ExpansionError("; ".join(errors))


def expand(src, sort: Optional[str] = None):
    """Expand a parsed program (or source text) to its entry term in base syntax.

    Already-expanded terms are returned unchanged, so expansion is idempotent.
    """
    if isinstance(src, (S.EXPR_TYPES + S.PROG_TYPES + S.TYPE_TYPES)):
        return src
    if isinstance(src, str):
        src = parse(src)
    if not isinstance(src, SourceProgram):
        raise TypeError("expand expects a SourceProgram or source text")
    if src.entry is None:
        raise ExpansionError("program has no 'main' entry term")
    return expand_node(src.entry, src.definitions, sort)


def expand_text(text: str, definitions: Optional[dict] = None, sort: Optional[str] = None):
    """Parse and elaborate a single term, optionally with definitions in scope."""
    return expand_node(parse_term(text), definitions, sort)
