"""Interpreter for the classical sublanguage (no ``u3`` and no ``rphase``).

Pure judgments denote injective partial functions on values and mixed
judgments arbitrary partial functions.  Partiality is a result
(:data:`UNDEFINED`), never an interpreter error.  Abstractions and ``ctrl``
invert patterns by enumerating the valuations of the pattern context.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import syntax as S
from .typecheck import (
    MIXED, PROG, PURE, Derivation, ctrl_parts, infer, is_classical, iter_derivations,
)
from .values import (
    PairVal, UNIT_VAL, LeftVal, RightVal, Value, cardinality, ctx_dim, valuation_index,
    valuations, value_index, values_of,
)

__all__ = [
    "Defined", "UNDEFINED", "PartialResult", "is_classical", "classical_pure_eval",
    "classical_mixed_eval", "classical_prog_eval", "run_classical", "NotClassical",
    "CLAUSES", "CoincidenceReport", "check_coincidence",
]


class NotClassical(ValueError):
    """Raised when asked to interpret a term containing u3 or rphase."""


@dataclass(frozen=True)
class Defined:
    value: Value


class _Undefined:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNDEFINED"

    def __bool__(self) -> bool:
        return False


UNDEFINED = _Undefined()
PartialResult = Union[Defined, _Undefined]


def _wrap(v: Optional[Value]) -> PartialResult:
    return UNDEFINED if v is None else Defined(v)


def _split(vals: tuple, *ctxs: tuple) -> list:
    out, k = [], 0
    for ctx in ctxs:
        out.append(vals[k:k + len(ctx)])
        k += len(ctx)
    return out


# ---------------------------------------------------------------------------
# Pure expressions
# ---------------------------------------------------------------------------


def classical_pure_eval(d: Derivation, sigma: Sequence, tau: Sequence) -> PartialResult:
    if d.kind != PURE:
        raise ValueError("classical_pure_eval needs a pure expression derivation")
    return _wrap(_pure(d, tuple(sigma), tuple(tau)))


def _pure(d: Derivation, sigma: tuple, tau: tuple) -> Optional[Value]:
    r = d.rule
    if r == "TUnit":
        return UNIT_VAL
    if r == "TCvar":
        return sigma[[x for x, _ in d.gamma].index(d.term.name)]
    if r == "TQvar":
        return tau[0]
    if r == "TPurePair":
        p0, p1 = d.premises
        sh, t0, t1 = _split(tau, d.info["shared"], d.info["delta0"], d.info["delta1"])
        a = _pure(p0, sigma, sh + t0)
        if a is None:
            return None
        b = _pure(p1, sigma, sh + t1)
        return None if b is None else PairVal(a, b)
    if r == "TPurePerm":
        (p,) = d.premises
        inner_sigma = [None] * len(sigma)
        for i, k in enumerate(d.info["pi_g"]):
            inner_sigma[k] = sigma[i]
        inner_tau = [None] * len(tau)
        for i, k in enumerate(d.info["pi_d"]):
            inner_tau[k] = tau[i]
        return _pure(p, tuple(inner_sigma), tuple(inner_tau))
    if r == "TPureApp":
        pf, pa = d.premises
        v = _pure(pa, sigma, tau)
        return None if v is None else _pure_prog(pf, v)
    if r == "TCtrl":
        scrut, pats, bodies = ctrl_parts(d)
        g_s, d_s = d.info["gamma_s"], d.info["delta_s"]
        tau_s = tau[:len(d_s)]
        v = _mixed(scrut, sigma[:len(g_s)] + tau_s)
        if v is None:
            return None
        for pd, bd in zip(pats, bodies):
            sj = _invert(pd, v)
            if sj is not None:
                return _pure(bd, sigma + sj, tau)
        return None
    raise NotClassical(f"rule {r} is outside the classical sublanguage")


_INVERSES: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _invert(d: Derivation, v: Value) -> Optional[tuple]:
    """The unique valuation ``tau`` of ``d.delta`` with ``[[d]](tau) = v`` (pure, empty Gamma)."""
    table = _INVERSES.get(d)
    if table is None:
        table = {}
        for tau in valuations(d.delta):
            out = _pure(d, (), tau)
            if out is not None:
                table[out] = tau
        _INVERSES[d] = table
    return table.get(v)


# ---------------------------------------------------------------------------
# Mixed expressions
# ---------------------------------------------------------------------------


def classical_mixed_eval(d: Derivation, tau: Sequence) -> PartialResult:
    if d.kind != MIXED:
        raise ValueError("classical_mixed_eval needs a mixed expression derivation")
    return _wrap(_mixed(d, tuple(tau)))


def _mixed(d: Derivation, tau: tuple) -> Optional[Value]:
    r = d.rule
    if r == "TMix":
        return _pure(d.premises[0], (), tau)
    if r == "TMixedPerm":
        (p,) = d.premises
        inner = [None] * len(tau)
        for i, k in enumerate(d.info["pi"]):
            inner[k] = tau[i]
        return _mixed(p, tuple(inner))
    if r == "TMixedPair":
        p0, p1 = d.premises
        sh, t0, t1 = _split(tau, d.info["shared"], d.info["delta0"], d.info["delta1"])
        a = _mixed(p0, sh + t0)
        if a is None:
            return None
        b = _mixed(p1, sh + t1)
        return None if b is None else PairVal(a, b)
    if r == "TTry":
        p0, p1 = d.premises
        t0, t1 = _split(tau, d.info["delta0"], d.info["delta1"])
        a = _mixed(p0, t0)
        return a if a is not None else _mixed(p1, t1)
    if r == "TMixedApp":
        pf, pa = d.premises
        v = _mixed(pa, tau)
        return None if v is None else _mixed_prog(pf, v)
    raise NotClassical(f"rule {r} is not a mixed expression rule")


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


def classical_prog_eval(d: Derivation, v: Value) -> PartialResult:
    if d.kind != PROG:
        raise ValueError("classical_prog_eval needs a program derivation")
    if isinstance(d.type, S.Coherent):
        return _wrap(_pure_prog(d, v))
    return _wrap(_mixed_prog(d, v))


def _pure_prog(d: Derivation, v: Value) -> Optional[Value]:
    r = d.rule
    if r == "TLeft":
        return LeftVal(v)
    if r == "TRight":
        return RightVal(v)
    if r == "TPureAbs":
        pd, bd = d.premises
        tau = _invert(pd, v)
        return None if tau is None else _pure(bd, (), tau)
    raise NotClassical(f"rule {r} is outside the classical sublanguage")


def _mixed_prog(d: Derivation, v: Value) -> Optional[Value]:
    r = d.rule
    if r == "TChannel":
        return _pure_prog(d.premises[0], v)
    if r == "TMixedAbs":
        pd, bd = d.premises
        full = _invert(pd, v)
        if full is None:
            return None
        return _mixed(bd, full[:len(d.info["delta"])])
    return _pure_prog(d, v)


# ---------------------------------------------------------------------------
# Convenience
# ---------------------------------------------------------------------------


def run_classical(term, value: Optional[Value] = None) -> PartialResult:
    """Run a closed classical term: programs on ``value``, expressions on no input."""
    d = term if isinstance(term, Derivation) else None
    if not is_classical(term if d is None else d.term):
        raise NotClassical("term uses u3 or rphase")
    if d is None:
        d = infer(term)
    if d.kind == PROG:
        if value is None:
            raise ValueError("a program needs an input value")
        return classical_prog_eval(d, value)
    if d.kind == PURE:
        return classical_pure_eval(d, (), ())
    return classical_mixed_eval(d, ())


# ---------------------------------------------------------------------------
# Agreement with the quantum semantics
# ---------------------------------------------------------------------------

CLAUSES = (
    "pure expression defined", "pure expression undefined",
    "mixed expression defined", "mixed expression undefined",
    "pure program defined", "pure program undefined",
    "mixed program defined", "mixed program undefined",
)


@dataclass
class CoincidenceReport:
    """Per-clause counts of basis inputs checked, plus any disagreements."""

    counts: dict = field(default_factory=lambda: {c: 0 for c in CLAUSES})
    mismatches: list = field(default_factory=list)
    max_deviation: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def merge(self, other: "CoincidenceReport") -> None:
        for c in CLAUSES:
            self.counts[c] += other.counts[c]
        self.mismatches.extend(other.mismatches)
        self.max_deviation = max(self.max_deviation, other.max_deviation)

    def covered(self) -> list:
        return [c for c in CLAUSES if self.counts[c]]


def _record(rep: CoincidenceReport, kind: str, d: Derivation, inp, res: PartialResult,
            got: np.ndarray, want_of, tol: float) -> None:
    defined = isinstance(res, Defined)
    want = want_of(res.value) if defined else np.zeros_like(got)
    dev = float(np.max(np.abs(got - want))) if got.size else 0.0
    rep.max_deviation = max(rep.max_deviation, dev)
    rep.counts[f"{kind} {'defined' if defined else 'undefined'}"] += 1
    if dev > tol:
        rep.mismatches.append((d.judgment(), inp, res, dev))


def check_coincidence(d: Derivation, tol: float = 1e-9, max_dim: int = 16,
                      recursive: bool = True) -> CoincidenceReport:
    """Compare classical and quantum semantics on every basis input.

    Pure judgments are compared column by column (``|tau>`` must map to
    ``|v>`` or to zero); mixed judgments on ``|tau><tau|``.  With
    ``recursive`` every sub-derivation is checked too.  Judgments whose input
    or output space exceeds ``max_dim`` are skipped.
    """
    from .semantics import mixed_expr_sem, mixed_prog_sem, pure_expr_sem, pure_prog_sem

    rep = CoincidenceReport()
    nodes = iter_derivations(d) if recursive else [d]
    for node in nodes:
        if not is_classical(node.term):
            raise NotClassical("term uses u3 or rphase")
        if node.kind == PURE:
            if max(ctx_dim(node.gamma) * ctx_dim(node.delta), cardinality(node.type)) > max_dim:
                continue
            n = cardinality(node.type)
            ket = lambda v, t=node.type, n=n: np.eye(n)[:, value_index(t, v)]
            for sigma in valuations(node.gamma):
                m = pure_expr_sem(node, sigma)
                for tau in valuations(node.delta):
                    res = classical_pure_eval(node, sigma, tau)
                    got = m[:, valuation_index(node.delta, tau)]
                    _record(rep, "pure expression", node, (sigma, tau), res, got, ket, tol)
        elif node.kind == MIXED:
            if max(ctx_dim(node.delta), cardinality(node.type)) > max_dim:
                continue
            s = mixed_expr_sem(node)
            for tau in valuations(node.delta):
                k = valuation_index(node.delta, tau)
                res = classical_mixed_eval(node, tau)
                got = s.apply(_proj(ctx_dim(node.delta), k))
                _record(rep, "mixed expression", node, tau, res, got,
                        lambda v, t=node.type: _proj(cardinality(t), value_index(t, v)), tol)
        else:
            t_in, t_out = node.type.dom, node.type.cod
            if max(cardinality(t_in), cardinality(t_out)) > max_dim:
                continue
            coherent = isinstance(node.type, S.Coherent)
            if coherent:
                m = pure_prog_sem(node)
            else:
                s = mixed_prog_sem(node)
            for k, v in enumerate(values_of(t_in)):
                res = classical_prog_eval(node, v)
                if coherent:
                    ket = lambda w, t=t_out: np.eye(cardinality(t))[:, value_index(t, w)]
                    _record(rep, "pure program", node, v, res, m[:, k], ket, tol)
                else:
                    got = s.apply(_proj(cardinality(t_in), k))
                    _record(rep, "mixed program", node, v, res, got,
                            lambda w, t=t_out: _proj(cardinality(t), value_index(t, w)), tol)
    return rep


def _proj(n: int, k: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=complex)
    out[k, k] = 1.0
    return out
