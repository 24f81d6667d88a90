"""Algorithmic typechecker producing explicit typing derivations.

The declarative rules leave context splitting and ordering open.  The
algorithm here fixes them:

* contexts are split by which variables each subterm needs
  (:func:`qunity.syntax.needed_vars`), keeping the ambient relative order;
* whenever the premises' natural context order differs from the requested
  one, an explicit ``TPurePerm`` / ``TMixedPerm`` node records the
  permutation, so that semantics and compilation never reorder implicitly;
* mixed typing prefers a pure-rooted derivation (``TMix``) and falls back to
  the structural mixed rules.

Side judgments (spanning, orthogonality, erasure, iso) return certificate
trees that the semantics and compiler consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import syntax as S
from .syntax import (
    BIT, Channel, Coherent, DataType, DomainError, EApp, ECtrl, EPair, ETry, EUnit, EVar,
    PAbs, PLeft, PRight, PRphase, PU3, TProd, TSum, TUnit, TVoid, UNIT,
)


class QunityTypeError(Exception):
    """A typing failure; ``rule`` names the rule (or side judgment) that failed."""

    def __init__(self, rule: str, message: str):
        super().__init__(f"[{rule}] {message}")
        self.rule = rule
        self.message = message


class NotSpanning(QunityTypeError):
    def __init__(self, message: str):
        super().__init__("spanning", message)


class NotOrthogonal(QunityTypeError):
    def __init__(self, message: str):
        super().__init__("ortho", message)


class ErasureFailure(QunityTypeError):
    def __init__(self, message: str):
        super().__init__("erases", message)


# ---------------------------------------------------------------------------
# Derivations
# ---------------------------------------------------------------------------

PURE, MIXED, PROG = "pure", "mixed", "prog"


@dataclass(eq=False)
class Derivation:
    """One node of a typing derivation.

    ``gamma`` and ``delta`` are contexts (tuples of ``(name, type)``).  Mixed
    judgments use only ``delta``; program judgments use neither.  ``info``
    holds rule-specific data: permutation maps, context splits and
    certificates.
    """

    rule: str
    kind: str
    gamma: tuple
    delta: tuple
    term: object
    type: object
    premises: tuple = ()
    info: dict = field(default_factory=dict)

    def judgment(self) -> str:
        t = S.show(self.type)
        if self.kind == PURE:
            return f"{_show_ctx(self.gamma)} ; {_show_ctx(self.delta)} |- {S.show(self.term)} : {t}"
        if self.kind == MIXED:
            return f"{_show_ctx(self.delta)} ||- {S.show(self.term)} : {t}"
        return f"|- {S.show(self.term)} : {t}"


def _show_ctx(ctx: tuple) -> str:
    if not ctx:
        return "()"
    return ", ".join(f"{x} : {S.show_type(t)}" for x, t in ctx)


def show_derivation(d: Derivation, indent: int = 0) -> str:
    """Human-readable tree dump, one judgment per line."""
    pad = "  " * indent
    extra = ""
    if d.rule in ("TPurePerm", "TMixedPerm"):
        extra = "  " + " ".join(f"{k}={list(v)}" for k, v in sorted(d.info.items()) if k.startswith("pi"))
    lines = [f"{pad}{d.rule}: {d.judgment()}{extra}"]
    for p in d.premises:
        lines.append(show_derivation(p, indent + 1))
    return "\n".join(lines)


def _names(ctx: tuple) -> list:
    return [x for x, _ in ctx]


def _perm_map(target: tuple, source: tuple) -> tuple:
    """Indices with ``target[i] == source[result[i]]``."""
    pos = {b[0]: i for i, b in enumerate(source)}
    return tuple(pos[x] for x, _ in target)


def _pure_perm(d: Derivation, gamma: tuple, delta: tuple) -> Derivation:
    if d.gamma == gamma and d.delta == delta:
        return d
    if sorted(d.gamma, key=repr) != sorted(gamma, key=repr) or sorted(d.delta, key=repr) != sorted(delta, key=repr):
        raise AssertionError("permutation between different contexts")
    return Derivation("TPurePerm", PURE, gamma, delta, d.term, d.type, (d,),
                      {"pi_g": _perm_map(gamma, d.gamma), "pi_d": _perm_map(delta, d.delta)})


def _mixed_perm(d: Derivation, delta: tuple) -> Derivation:
    if d.delta == delta:
        return d
    return Derivation("TMixedPerm", MIXED, (), delta, d.term, d.type, (d,),
                      {"pi": _perm_map(delta, d.delta)})


def _restrict(ctx: tuple, names) -> tuple:
    names = set(names)
    return tuple(b for b in ctx if b[0] in names)


def _check_wellformed(*ctxs: tuple) -> None:
    seen = set()
    for ctx in ctxs:
        for x, _ in ctx:
            if x in seen:
                raise QunityTypeError("context", f"variable {x} bound twice")
            seen.add(x)


def _check_reals(rule: str, *rs) -> None:
    for r in rs:
        try:
            S.eval_real(r)
        except DomainError as exc:
            raise QunityTypeError(rule, f"invalid real constant {S.show_real(r)}: {exc}") from exc


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SVoid:
    type: DataType

    @property
    def patterns(self) -> tuple:
        return ()


@dataclass(frozen=True)
class SUnit:
    @property
    def patterns(self) -> tuple:
        return (EUnit(),)


@dataclass(frozen=True)
class SVar:
    name: str
    type: DataType

    @property
    def patterns(self) -> tuple:
        return (EVar(self.name),)


@dataclass(frozen=True)
class SSum:
    type: TSum
    left: object
    right: object

    @property
    def patterns(self) -> tuple:
        t = self.type
        return tuple(EApp(PLeft(t.left, t.right), p) for p in self.left.patterns) + tuple(
            EApp(PRight(t.left, t.right), p) for p in self.right.patterns)


@dataclass(frozen=True)
class SPair:
    type: TProd
    base: object
    branches: tuple  # one certificate per base pattern

    @property
    def patterns(self) -> tuple:
        out = []
        for b, cert in zip(self.base.patterns, self.branches):
            out.extend(EPair(b, p) for p in cert.patterns)
        return tuple(out)


@dataclass(frozen=True)
class SPerm:
    perm: tuple  # conclusion[i] = inner.patterns[perm[i]]
    inner: object

    @property
    def patterns(self) -> tuple:
        inner = self.inner.patterns
        return tuple(inner[k] for k in self.perm)


@dataclass(frozen=True)
class OrthoCert:
    spanning: object
    keep: tuple  # booleans aligned with spanning.patterns

    @property
    def patterns(self) -> tuple:
        return tuple(p for p, k in zip(self.spanning.patterns, self.keep) if k)


def _fresh_var(avoid: set) -> str:
    k = 0
    while f"_o{k}" in avoid:
        k += 1
    avoid.add(f"_o{k}")
    return f"_o{k}"


def _complete(t: DataType, pats: list, avoid: set):
    """Spanning certificate (in natural order) for a superlist of ``pats``."""
    if not pats:
        if isinstance(t, TVoid):
            return SVoid(t)
        return SVar(_fresh_var(avoid), t)
    if any(isinstance(p, EVar) for p in pats):
        if len(pats) == 1:
            return SVar(pats[0].name, t)
        raise NotOrthogonal(f"variable pattern overlaps other patterns at type {S.show_type(t)}")
    if isinstance(t, TVoid):
        raise NotOrthogonal("non-variable pattern at type Void")
    if isinstance(t, TUnit):
        if all(isinstance(p, EUnit) for p in pats):
            if len(pats) == 1:
                return SUnit()
            raise NotOrthogonal("duplicate () patterns")
        raise NotOrthogonal(f"pattern {S.show(pats[0])} does not decompose type ()")
    if isinstance(t, TSum):
        lefts, rights = [], []
        for p in pats:
            if isinstance(p, EApp) and isinstance(p.prog, PLeft) and (p.prog.t0, p.prog.t1) == (t.left, t.right):
                lefts.append(p.arg)
            elif isinstance(p, EApp) and isinstance(p.prog, PRight) and (p.prog.t0, p.prog.t1) == (t.left, t.right):
                rights.append(p.arg)
            else:
                raise NotOrthogonal(f"pattern {S.show(p)} is not an injection into {S.show_type(t)}")
        return SSum(t, _complete(t.left, lefts, avoid), _complete(t.right, rights, avoid))
    if isinstance(t, TProd):
        groups: dict = {}
        order: list = []
        for p in pats:
            if not isinstance(p, EPair):
                raise NotOrthogonal(f"pattern {S.show(p)} is not a pair at {S.show_type(t)}")
            if p.first not in groups:
                groups[p.first] = []
                order.append(p.first)
            groups[p.first].append(p.second)
        base = _complete(t.left, order, avoid)
        branches = []
        for b in base.patterns:
            seconds = groups.get(b, [])
            cert = _complete(t.right, seconds, avoid)
            fv = S.free_vars(b)
            for q in cert.patterns:
                if fv & S.free_vars(q):
                    raise NotOrthogonal(
                        f"pair patterns ({S.show(b)}, {S.show(q)}) share variables")
            branches.append(cert)
        return SPair(t, base, tuple(branches))
    raise TypeError(t)


def check_ortho(t: DataType, patterns) -> OrthoCert:
    """Certificate that ``patterns`` is a subsequence of some spanning list for ``t``."""
    pats = list(patterns)
    for i, p in enumerate(pats):
        if p in pats[:i]:
            raise NotOrthogonal(f"duplicate pattern {S.show(p)}")
    avoid: set = set()
    for p in pats:
        avoid |= S.free_vars(p)
    natural = _complete(t, pats, avoid)
    listed = natural.patterns
    positions = [listed.index(p) for p in pats]
    if positions == sorted(positions):
        keep = tuple(p in pats for p in listed)
        return OrthoCert(natural, keep)
    rest = [i for i in range(len(listed)) if i not in positions]
    perm = tuple(positions + rest)
    cert = SPerm(perm, natural)
    keep = tuple([True] * len(pats) + [False] * len(rest))
    return OrthoCert(cert, keep)


def check_spanning(t: DataType, patterns):
    """Spanning certificate whose conclusion list is exactly ``patterns``."""
    try:
        oc = check_ortho(t, patterns)
    except NotOrthogonal as exc:
        raise NotSpanning(exc.message) from exc
    if not all(oc.keep):
        missing = [S.show(p) for p, k in zip(oc.spanning.patterns, oc.keep) if not k]
        raise NotSpanning(f"patterns do not cover {S.show_type(t)}; uncovered: {', '.join(missing)}")
    return oc.spanning


def spanning_type(cert) -> DataType:
    if isinstance(cert, SPerm):
        return spanning_type(cert.inner)
    if isinstance(cert, SUnit):
        return UNIT
    return cert.type


# -- erasure ---------------------------------------------------------------


@dataclass(frozen=True)
class EVarCert:
    pass


@dataclass(frozen=True)
class EGphaseCert:
    index: int
    inner: object


@dataclass(frozen=True)
class ECtrlCert:
    index: int
    arity: int
    inner: object


@dataclass(frozen=True)
class EPair0Cert:
    inner: object


@dataclass(frozen=True)
class EPair1Cert:
    inner: object


def _is_gphase(e) -> bool:
    return (isinstance(e, EApp) and isinstance(e.prog, PRphase)
            and isinstance(e.prog.pattern, EVar) and e.prog.r_match == e.prog.r_other)


def _erase(t: DataType, x: str, bodies: list):
    for j, b in enumerate(bodies):
        if _is_gphase(b):
            rest = bodies[:j] + [b.arg] + bodies[j + 1:]
            return EGphaseCert(j, _erase(t, x, rest))
        if isinstance(b, ECtrl):
            rest = bodies[:j] + [e for _, e in b.branches] + bodies[j + 1:]
            return ECtrlCert(j, len(b.branches), _erase(t, x, rest))
    if all(b == EVar(x) for b in bodies):
        return EVarCert()
    if isinstance(t, TProd) and all(isinstance(b, EPair) for b in bodies):
        try:
            return EPair0Cert(_erase(t.left, x, [b.first for b in bodies]))
        except ErasureFailure:
            return EPair1Cert(_erase(t.right, x, [b.second for b in bodies]))
    bad = next((b for b in bodies if b != EVar(x)), None)
    raise ErasureFailure(f"cannot erase {x} from body {S.show(bad) if bad is not None else '?'}")


def check_erases(t: DataType, x: str, bodies) -> object:
    return _erase(t, x, list(bodies))


def erasure_path(cert) -> tuple:
    """The sequence of pair components (0/1) leading to the erased variable."""
    path = []
    while not isinstance(cert, EVarCert):
        if isinstance(cert, EPair0Cert):
            path.append(0)
        elif isinstance(cert, EPair1Cert):
            path.append(1)
        cert = cert.inner
    return tuple(path)


# -- iso --------------------------------------------------------------------


@dataclass(frozen=True)
class IsoFlag:
    ok: bool
    trace: tuple

    def __bool__(self) -> bool:
        return self.ok


def is_classical(term) -> bool:
    return not S.has_quantum_primitive(term)


def check_iso(term) -> IsoFlag:
    trace: list = []
    ok = _iso(term, trace)
    return IsoFlag(ok, tuple(trace))


def _spans(t, pats) -> bool:
    try:
        check_spanning(t, pats)
        return True
    except QunityTypeError:
        return False


def _iso(term, trace: list) -> bool:
    if isinstance(term, EUnit):
        trace.append("I-Unit")
        return True
    if isinstance(term, EVar):
        trace.append("I-Var")
        return True
    if isinstance(term, EPair):
        trace.append("I-Pair")
        return _iso(term.first, trace) and _iso(term.second, trace)
    if isinstance(term, ECtrl):
        trace.append("I-Ctrl")
        return (is_classical(term.scrutinee) and _iso(term.scrutinee, trace)
                and _spans(term.stype, [p for p, _ in term.branches])
                and all(_iso(b, trace) for _, b in term.branches))
    if isinstance(term, ETry):
        if _iso(term.body, trace):
            trace.append("I-Try")
            return True
        trace.append("I-Catch")
        return _iso(term.handler, trace)
    if isinstance(term, EApp):
        trace.append("I-App")
        return _iso(term.prog, trace) and _iso(term.arg, trace)
    if isinstance(term, PU3):
        trace.append("I-Gate")
        return True
    if isinstance(term, PLeft):
        trace.append("I-Left")
        return True
    if isinstance(term, PRight):
        trace.append("I-Right")
        return True
    if isinstance(term, PRphase):
        trace.append("I-Rphase")
        return True
    if isinstance(term, PAbs):
        trace.append("I-Abs")
        return _spans(term.dtype, [term.pattern]) and _iso(term.body, trace)
    raise TypeError(term)


# ---------------------------------------------------------------------------
# Pattern contexts
# ---------------------------------------------------------------------------


def infer_ctx(e, t: DataType) -> tuple:
    """The quantum context under which pattern ``e`` has type ``t``.

    Variable types are read off the expected type; variables are ordered by
    first occurrence.
    """
    types: dict = {}
    _ctx_into(e, t, types)
    order = [x for x in S.vars_in_order(e) if x in types]
    return tuple((x, types[x]) for x in order)


def _merge(types: dict, x: str, t: DataType) -> None:
    if x in types and types[x] != t:
        raise QunityTypeError("T-Qvar", f"variable {x} used at types {S.show_type(types[x])} "
                                        f"and {S.show_type(t)}")
    types[x] = t


def _ctx_into(e, t: DataType, types: dict) -> None:
    if isinstance(e, EVar):
        _merge(types, e.name, t)
    elif isinstance(e, EUnit):
        if t != UNIT:
            raise QunityTypeError("T-Unit", f"() used at type {S.show_type(t)}")
    elif isinstance(e, EPair):
        if not isinstance(t, TProd):
            raise QunityTypeError("T-PurePair", f"pair {S.show(e)} used at type {S.show_type(t)}")
        _ctx_into(e.first, t.left, types)
        _ctx_into(e.second, t.right, types)
    elif isinstance(e, EApp):
        pd = infer_prog(e.prog)
        if not isinstance(pd.type, Coherent):
            raise QunityTypeError("T-PureApp", f"program {S.show(e.prog)} is not pure")
        if pd.type.cod != t:
            raise QunityTypeError("T-PureApp", f"{S.show(e)} has type {S.show_type(pd.type.cod)}, "
                                               f"expected {S.show_type(t)}")
        _ctx_into(e.arg, pd.type.dom, types)
    elif isinstance(e, ECtrl):
        if e.rtype != t:
            raise QunityTypeError("T-Ctrl", f"ctrl annotated {S.show_type(e.rtype)}, expected {S.show_type(t)}")
        _ctx_into(e.scrutinee, e.stype, types)
        for p, b in e.branches:
            inner: dict = {}
            _ctx_into(b, e.rtype, inner)
            bound = S.free_vars(p)
            for x, tx in inner.items():
                if x not in bound:
                    _merge(types, x, tx)
    elif isinstance(e, ETry):
        raise QunityTypeError("T-Try", "try/catch has no pure type")
    else:
        raise TypeError(e)


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

_PURE_MEMO: dict = {}
_MIXED_MEMO: dict = {}
_PROG_MEMO: dict = {}


def clear_caches() -> None:
    _PURE_MEMO.clear()
    _MIXED_MEMO.clear()
    _PROG_MEMO.clear()


def _memo(table: dict, key, compute):
    hit = table.get(key)
    if hit is None:
        try:
            hit = (True, compute())
        except QunityTypeError as exc:
            hit = (False, exc)
        table[key] = hit
    ok, value = hit
    if ok:
        return value
    raise value


def infer_pure_expr(gamma: tuple, delta: tuple, e) -> Derivation:
    """Derivation of ``gamma ; delta |- e : T`` (contexts kept in the given order)."""
    gamma, delta = tuple(gamma), tuple(delta)
    _check_wellformed(gamma, delta)
    return _memo(_PURE_MEMO, (gamma, delta, e), lambda: _pure(gamma, delta, e))


def infer_mixed_expr(delta: tuple, e) -> Derivation:
    """Derivation of ``delta ||- e : T``."""
    delta = tuple(delta)
    _check_wellformed(delta)
    return _memo(_MIXED_MEMO, (delta, e), lambda: _mixed(delta, e))


def infer_prog(f) -> Derivation:
    """Most specific program derivation: coherent if possible, otherwise a channel."""
    return _memo(_PROG_MEMO, f, lambda: _prog(f))


def _split(delta: tuple, n0: frozenset, n1: frozenset, rule: str, term) -> tuple:
    shared, only0, only1 = [], [], []
    for b in delta:
        x = b[0]
        if x in n0 and x in n1:
            shared.append(b)
        elif x in n0:
            only0.append(b)
        elif x in n1:
            only1.append(b)
        else:
            raise QunityTypeError(rule, f"quantum variable {x} is unused in {S.show(term)}")
    return tuple(shared), tuple(only0), tuple(only1)


def _pure(gamma: tuple, delta: tuple, e) -> Derivation:
    if isinstance(e, EUnit):
        if delta:
            raise QunityTypeError("T-Unit", f"quantum variables {_names(delta)} unused by ()")
        return Derivation("TUnit", PURE, gamma, (), e, UNIT)
    if isinstance(e, EVar):
        gmap = dict(gamma)
        if e.name in gmap:
            if delta:
                raise QunityTypeError("T-Cvar", f"quantum variables {_names(delta)} unused by {e.name}")
            return Derivation("TCvar", PURE, gamma, (), e, gmap[e.name])
        dmap = dict(delta)
        if e.name not in dmap:
            raise QunityTypeError("T-Qvar", f"unbound variable {e.name}")
        if len(delta) != 1:
            unused = [x for x in _names(delta) if x != e.name]
            raise QunityTypeError("T-Qvar", f"quantum variables {unused} unused by {e.name}")
        return Derivation("TQvar", PURE, gamma, delta, e, dmap[e.name])
    if isinstance(e, EPair):
        n0, n1 = S.needed_vars(e.first), S.needed_vars(e.second)
        shared, d0, d1 = _split(delta, n0, n1, "T-PurePair", e)
        p0 = infer_pure_expr(gamma, shared + d0, e.first)
        p1 = infer_pure_expr(gamma, shared + d1, e.second)
        d = Derivation("TPurePair", PURE, gamma, shared + d0 + d1, e,
                       TProd(p0.type, p1.type), (p0, p1),
                       {"shared": shared, "delta0": d0, "delta1": d1})
        return _pure_perm(d, gamma, delta)
    if isinstance(e, EApp):
        pf = infer_prog(e.prog)
        if not isinstance(pf.type, Coherent):
            raise QunityTypeError("T-PureApp", f"program {S.show(e.prog)} has only a channel type")
        pa = infer_pure_expr(gamma, delta, e.arg)
        if pa.type != pf.type.dom:
            raise QunityTypeError("T-PureApp", f"argument of type {S.show_type(pa.type)} given to "
                                               f"program expecting {S.show_type(pf.type.dom)}")
        return Derivation("TPureApp", PURE, gamma, delta, e, pf.type.cod, (pf, pa))
    if isinstance(e, ETry):
        raise QunityTypeError("T-Try", "try/catch expressions have no pure type")
    if isinstance(e, ECtrl):
        return _ctrl(gamma, delta, e)
    raise TypeError(e)


def _ctrl(gamma: tuple, delta: tuple, e: ECtrl) -> Derivation:
    nscr = S.needed_vars(e.scrutinee)
    ambient = set(_names(gamma)) | set(_names(delta))
    missing = nscr - ambient
    if missing:
        raise QunityTypeError("T-Ctrl", f"unbound variables {sorted(missing)} in scrutinee")
    g_s = _restrict(gamma, nscr)
    g_rest = tuple(b for b in gamma if b[0] not in nscr)
    d_s = _restrict(delta, nscr)
    d_rest = tuple(b for b in delta if b[0] not in nscr)
    scrut = infer_mixed_expr(g_s + d_s, e.scrutinee)
    if scrut.type != e.stype:
        raise QunityTypeError("T-Ctrl", f"scrutinee has type {S.show_type(scrut.type)}, "
                                        f"annotated {S.show_type(e.stype)}")
    patterns = [p for p, _ in e.branches]
    bodies = [b for _, b in e.branches]
    pat_ctxs, pat_derivs, body_derivs = [], [], []
    for p, b in e.branches:
        gj = infer_ctx(p, e.stype)
        clash = set(_names(gj)) & ambient
        if clash:
            raise QunityTypeError("T-Ctrl", f"pattern variables {sorted(clash)} shadow the context")
        pd = infer_pure_expr((), gj, p)
        if pd.type != e.stype:
            raise QunityTypeError("T-Ctrl", f"pattern {S.show(p)} has type {S.show_type(pd.type)}")
        bd = infer_pure_expr(g_s + g_rest + gj, d_s + d_rest, b)
        if bd.type != e.rtype:
            raise QunityTypeError("T-Ctrl", f"branch body {S.show(b)} has type {S.show_type(bd.type)}, "
                                            f"annotated {S.show_type(e.rtype)}")
        pat_ctxs.append(gj)
        pat_derivs.append(pd)
        body_derivs.append(bd)
    if not e.branches and d_rest:
        raise QunityTypeError("T-Ctrl", f"quantum variables {_names(d_rest)} unused (no branches)")
    ortho = check_ortho(e.stype, patterns)
    erasures = {x: check_erases(e.rtype, x, bodies) for x, _ in d_s}
    d = Derivation("TCtrl", PURE, g_s + g_rest, d_s + d_rest, e, e.rtype,
                   (scrut, *pat_derivs, *body_derivs),
                   {"gamma_s": g_s, "gamma_rest": g_rest, "delta_s": d_s, "delta_rest": d_rest,
                    "pattern_ctxs": tuple(pat_ctxs), "ortho": ortho, "erases": erasures,
                    "n": len(e.branches)})
    return _pure_perm(d, gamma, delta)


def ctrl_parts(d: Derivation):
    """Split a TCtrl node's premises into (scrutinee, patterns, bodies)."""
    n = d.info["n"]
    return d.premises[0], d.premises[1:1 + n], d.premises[1 + n:]


def _mixed(delta: tuple, e) -> Derivation:
    try:
        p = infer_pure_expr((), delta, e)
        return Derivation("TMix", MIXED, (), delta, e, p.type, (p,))
    except QunityTypeError as pure_error:
        first_error = pure_error
    if isinstance(e, EPair):
        n0, n1 = S.needed_vars(e.first), S.needed_vars(e.second)
        shared, d0, d1 = _split(delta, n0, n1, "T-MixedPair", e)
        p0 = infer_mixed_expr(shared + d0, e.first)
        p1 = infer_mixed_expr(shared + d1, e.second)
        d = Derivation("TMixedPair", MIXED, (), shared + d0 + d1, e, TProd(p0.type, p1.type),
                       (p0, p1), {"shared": shared, "delta0": d0, "delta1": d1})
        return _mixed_perm(d, delta)
    if isinstance(e, ETry):
        n0, n1 = S.needed_vars(e.body), S.needed_vars(e.handler)
        both = n0 & n1 & set(_names(delta))
        if both:
            raise QunityTypeError("T-Try", f"variables {sorted(both)} needed by both try and catch")
        shared, d0, d1 = _split(delta, n0, n1, "T-Try", e)
        p0 = infer_mixed_expr(d0, e.body)
        p1 = infer_mixed_expr(d1, e.handler)
        if p0.type != p1.type:
            raise QunityTypeError("T-Try", f"try has type {S.show_type(p0.type)} but catch has "
                                           f"{S.show_type(p1.type)}")
        d = Derivation("TTry", MIXED, (), d0 + d1, e, p0.type, (p0, p1),
                       {"delta0": d0, "delta1": d1})
        return _mixed_perm(d, delta)
    if isinstance(e, EApp):
        pf = infer_prog(e.prog)
        if isinstance(pf.type, Coherent):
            pf = Derivation("TChannel", PROG, (), (), e.prog, Channel(pf.type.dom, pf.type.cod), (pf,))
        pa = infer_mixed_expr(delta, e.arg)
        if pa.type != pf.type.dom:
            raise QunityTypeError("T-MixedApp", f"argument of type {S.show_type(pa.type)} given to "
                                                f"program expecting {S.show_type(pf.type.dom)}")
        return Derivation("TMixedApp", MIXED, (), delta, e, pf.type.cod, (pf, pa))
    raise first_error


def _prog(f) -> Derivation:
    if isinstance(f, PU3):
        _check_reals("T-Gate", f.theta, f.phi, f.lam)
        return Derivation("TGate", PROG, (), (), f, Coherent(BIT, BIT))
    if isinstance(f, PLeft):
        return Derivation("TLeft", PROG, (), (), f, Coherent(f.t0, TSum(f.t0, f.t1)))
    if isinstance(f, PRight):
        return Derivation("TRight", PROG, (), (), f, Coherent(f.t1, TSum(f.t0, f.t1)))
    if isinstance(f, PRphase):
        _check_reals("T-Rphase", f.r_match, f.r_other)
        ctx = infer_ctx(f.pattern, f.dtype)
        pd = infer_pure_expr((), ctx, f.pattern)
        return Derivation("TRphase", PROG, (), (), f, Coherent(f.dtype, f.dtype), (pd,))
    if isinstance(f, PAbs):
        ctx = infer_ctx(f.pattern, f.dtype)
        pd = infer_pure_expr((), ctx, f.pattern)
        if pd.type != f.dtype:
            raise QunityTypeError("T-PureAbs", f"pattern has type {S.show_type(pd.type)}, "
                                               f"annotated {S.show_type(f.dtype)}")
        need = S.needed_vars(f.body)
        leak = need - set(_names(ctx))
        if leak:
            raise QunityTypeError("T-PureAbs", f"program body has free variables {sorted(leak)}")
        if need >= set(_names(ctx)):
            try:
                bd = infer_pure_expr((), ctx, f.body)
                return Derivation("TPureAbs", PROG, (), (), f, Coherent(f.dtype, bd.type), (pd, bd),
                                  {"delta": ctx})
            except QunityTypeError:
                pass
        used = _restrict(ctx, need)
        dropped = tuple(b for b in ctx if b[0] not in need)
        pd2 = infer_pure_expr((), used + dropped, f.pattern)
        bd = infer_mixed_expr(used, f.body)
        return Derivation("TMixedAbs", PROG, (), (), f, Channel(f.dtype, bd.type), (pd2, bd),
                          {"delta": used, "delta0": dropped})
    raise TypeError(f)


def infer(term) -> Derivation:
    """Type a closed term: programs via infer_prog, expressions pure-first then mixed."""
    if S.is_prog(term):
        return infer_prog(term)
    try:
        return infer_pure_expr((), (), term)
    except QunityTypeError:
        return infer_mixed_expr((), term)


def as_channel(d: Derivation) -> Derivation:
    """Lift a coherent program derivation with T-Channel (no-op on channels)."""
    if d.kind == PROG and isinstance(d.type, Coherent):
        return Derivation("TChannel", PROG, (), (), d.term, Channel(d.type.dom, d.type.cod), (d,))
    return d


def as_mixed(d: Derivation) -> Derivation:
    """View a closed pure expression derivation as mixed via T-Mix."""
    if d.kind == PURE:
        if d.gamma:
            raise ValueError("T-Mix needs an empty classical context")
        return Derivation("TMix", MIXED, (), d.delta, d.term, d.type, (d,))
    return d


# ---------------------------------------------------------------------------
# Re-validation against the rule schemas
# ---------------------------------------------------------------------------


class InvalidDerivation(AssertionError):
    pass


def _need(cond: bool, d: Derivation, msg: str) -> None:
    if not cond:
        raise InvalidDerivation(f"{d.rule}: {msg} at {d.judgment()}")


def validate(d: Derivation) -> None:
    """Check every node's premises against its rule schema; raises InvalidDerivation."""
    for p in d.premises:
        validate(p)
    r, e = d.rule, d.term
    names = _names(d.gamma) + _names(d.delta)
    _need(len(names) == len(set(names)), d, "ill-formed context")
    if d.kind == PURE:
        _need(set(_names(d.delta)) <= S.free_vars(e), d, "relevance violated")
    if r == "TUnit":
        _need(isinstance(e, EUnit) and d.delta == () and d.type == UNIT, d, "shape")
    elif r == "TCvar":
        _need(isinstance(e, EVar) and d.delta == () and (e.name, d.type) in d.gamma, d, "shape")
    elif r == "TQvar":
        _need(isinstance(e, EVar) and d.delta == ((e.name, d.type),)
              and e.name not in _names(d.gamma), d, "shape")
    elif r in ("TPurePair", "TMixedPair"):
        p0, p1 = d.premises
        sh, a, b = d.info["shared"], d.info["delta0"], d.info["delta1"]
        _need(d.delta == sh + a + b and p0.delta == sh + a and p1.delta == sh + b, d, "context split")
        _need(p0.gamma == d.gamma and p1.gamma == d.gamma, d, "classical context")
        _need(isinstance(e, EPair) and p0.term == e.first and p1.term == e.second, d, "terms")
        _need(d.type == TProd(p0.type, p1.type), d, "type")
        _need(p0.kind == d.kind and p1.kind == d.kind, d, "premise kinds")
    elif r == "TPurePerm":
        (p,) = d.premises
        _need(tuple(p.gamma[k] for k in d.info["pi_g"]) == d.gamma, d, "pi_g")
        _need(tuple(p.delta[k] for k in d.info["pi_d"]) == d.delta, d, "pi_d")
        _need(len(p.gamma) == len(d.gamma) and len(p.delta) == len(d.delta), d, "permutation size")
        _need(p.term == e and p.type == d.type and p.kind == PURE, d, "premise")
    elif r == "TMixedPerm":
        (p,) = d.premises
        _need(tuple(p.delta[k] for k in d.info["pi"]) == d.delta and len(p.delta) == len(d.delta), d, "pi")
        _need(p.term == e and p.type == d.type and p.kind == MIXED, d, "premise")
    elif r == "TPureApp":
        pf, pa = d.premises
        _need(isinstance(pf.type, Coherent) and pf.type.dom == pa.type and pf.type.cod == d.type, d, "types")
        _need((pa.gamma, pa.delta) == (d.gamma, d.delta) and pa.kind == PURE, d, "contexts")
        _need(isinstance(e, EApp) and pf.term == e.prog and pa.term == e.arg, d, "terms")
    elif r == "TCtrl":
        scrut, pats, bodies = ctrl_parts(d)
        i = d.info
        _need(d.gamma == i["gamma_s"] + i["gamma_rest"] and d.delta == i["delta_s"] + i["delta_rest"],
              d, "context split")
        _need(scrut.kind == MIXED and scrut.delta == i["gamma_s"] + i["delta_s"]
              and scrut.type == e.stype and scrut.term == e.scrutinee, d, "scrutinee")
        _need(len(pats) == len(bodies) == len(e.branches), d, "branch count")
        _need(i["ortho"].patterns == tuple(p for p, _ in e.branches), d, "ortho certificate")
        _need(set(i["erases"]) == set(_names(i["delta_s"])), d, "erasure certificates")
        for (p, b), pd, bd, gj in zip(e.branches, pats, bodies, i["pattern_ctxs"]):
            _need(pd.term == p and pd.gamma == () and pd.delta == gj and pd.type == e.stype, d, "pattern")
            _need(bd.term == b and bd.gamma == d.gamma + gj and bd.delta == d.delta
                  and bd.type == e.rtype, d, "body")
        _need(d.type == e.rtype, d, "type")
    elif r == "TMix":
        (p,) = d.premises
        _need(p.kind == PURE and p.gamma == () and p.delta == d.delta and p.type == d.type, d, "premise")
    elif r == "TTry":
        p0, p1 = d.premises
        _need(d.delta == d.info["delta0"] + d.info["delta1"] and p0.delta == d.info["delta0"]
              and p1.delta == d.info["delta1"], d, "context split")
        _need(isinstance(e, ETry) and p0.type == p1.type == d.type, d, "types")
    elif r == "TMixedApp":
        pf, pa = d.premises
        _need(isinstance(pf.type, Channel) and pf.type.dom == pa.type and pf.type.cod == d.type, d, "types")
        _need(pa.delta == d.delta and pa.kind == MIXED, d, "context")
    elif r == "TGate":
        _need(isinstance(e, PU3) and d.type == Coherent(BIT, BIT), d, "shape")
    elif r == "TLeft":
        _need(isinstance(e, PLeft) and d.type == Coherent(e.t0, TSum(e.t0, e.t1)), d, "shape")
    elif r == "TRight":
        _need(isinstance(e, PRight) and d.type == Coherent(e.t1, TSum(e.t0, e.t1)), d, "shape")
    elif r == "TPureAbs":
        pd, bd = d.premises
        _need(pd.gamma == () and bd.gamma == () and pd.delta == bd.delta, d, "contexts")
        _need(d.type == Coherent(pd.type, bd.type) and pd.type == e.dtype, d, "types")
    elif r == "TRphase":
        (pd,) = d.premises
        _need(pd.gamma == () and pd.type == e.dtype and d.type == Coherent(e.dtype, e.dtype), d, "shape")
    elif r == "TChannel":
        (p,) = d.premises
        _need(isinstance(p.type, Coherent) and d.type == Channel(p.type.dom, p.type.cod), d, "shape")
    elif r == "TMixedAbs":
        pd, bd = d.premises
        _need(pd.delta == d.info["delta"] + d.info["delta0"] and bd.delta == d.info["delta"], d, "contexts")
        _need(d.type == Channel(pd.type, bd.type) and pd.type == e.dtype, d, "types")
    else:
        raise InvalidDerivation(f"unknown rule {r}")


def iter_derivations(d: Derivation):
    """All nodes of a derivation, parents before premises."""
    yield d
    for p in d.premises:
        yield from iter_derivations(p)
