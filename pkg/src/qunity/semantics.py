"""Denotational semantics of typing derivations.

Pure judgments denote matrices (Kraus operators) whose rows are indexed by
``values_of(T)`` and columns by the valuations of the quantum context, both
in canonical order.  Mixed judgments denote :class:`Superoperator` tensors.

The try/catch case uses the linear extension of the basis formula:
``E0(|t0><t0'|) * [t1 = t1'] + ([t0 = t0'] - tr E0(|t0><t0'|)) * E1(|t1><t1'|)``.
On diagonal inputs this agrees with the basis definition, and unlike a
literal reading for off-diagonal inputs it stays trace non-increasing.
"""

from __future__ import annotations

import weakref
from typing import Sequence

import numpy as np

from . import syntax as S
from .linalg import Superoperator
from .typecheck import (
    MIXED, PROG, PURE, Derivation, as_channel, ctrl_parts, infer, infer_ctx, infer_pure_expr,
)
from .values import cardinality, ctx_dim, valuation_index, valuations, value_index

_PURE_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()
_MIXED_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()
_PROG_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _dims(ctx: tuple) -> list:
    return [cardinality(t) for _, t in ctx]


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s],
                     [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]], dtype=complex)


def injection_matrix(t0: S.DataType, t1: S.DataType, right: bool) -> np.ndarray:
    n0, n1 = cardinality(t0), cardinality(t1)
    m = np.zeros((n0 + n1, n1 if right else n0), dtype=complex)
    if right:
        m[n0:, :] = np.eye(n1)
    else:
        m[:n0, :] = np.eye(n0)
    return m


# ---------------------------------------------------------------------------
# Pure expressions
# ---------------------------------------------------------------------------


def pure_expr_sem(d: Derivation, sigma: Sequence = ()) -> np.ndarray:
    """Matrix of ``sigma : Gamma ; Delta |- e : T`` (shape |V(T)| x |V(Delta)|)."""
    if d.kind != PURE:
        raise ValueError("pure_expr_sem needs a pure expression derivation")
    sigma = tuple(sigma)
    if len(sigma) != len(d.gamma):
        raise ValueError("valuation does not match the classical context")
    table = _PURE_CACHE.setdefault(d, {})
    if sigma not in table:
        table[sigma] = _pure(d, sigma)
    return table[sigma]


def _pure(d: Derivation, sigma: tuple) -> np.ndarray:
    r = d.rule
    if r == "TUnit":
        return np.ones((1, 1), dtype=complex)
    if r == "TCvar":
        names = [x for x, _ in d.gamma]
        v = sigma[names.index(d.term.name)]
        out = np.zeros((cardinality(d.type), 1), dtype=complex)
        out[value_index(d.type, v), 0] = 1.0
        return out
    if r == "TQvar":
        return np.eye(cardinality(d.type), dtype=complex)
    if r == "TPurePair":
        p0, p1 = d.premises
        e0 = pure_expr_sem(p0, sigma)
        e1 = pure_expr_sem(p1, sigma)
        s = ctx_dim(d.info["shared"])
        a = ctx_dim(d.info["delta0"])
        b = ctx_dim(d.info["delta1"])
        t0, t1 = e0.shape[0], e1.shape[0]
        out = np.einsum("xsa,ysb->xysab", e0.reshape(t0, s, a), e1.reshape(t1, s, b))
        return out.reshape(t0 * t1, s * a * b)
    if r == "TPurePerm":
        (p,) = d.premises
        pi_g, pi_d = d.info["pi_g"], d.info["pi_d"]
        inner_sigma = [None] * len(sigma)
        for i, k in enumerate(pi_g):
            inner_sigma[k] = sigma[i]
        m = pure_expr_sem(p, tuple(inner_sigma))
        dims = _dims(p.delta)
        t = m.shape[0]
        m = m.reshape([t] + dims)
        m = np.transpose(m, [0] + [1 + k for k in pi_d])
        return m.reshape(t, ctx_dim(d.delta))
    if r == "TPureApp":
        pf, pa = d.premises
        return pure_prog_sem(pf) @ pure_expr_sem(pa, sigma)
    if r == "TCtrl":
        return _ctrl(d, sigma)
    raise ValueError(f"not a pure expression rule: {r}")


def _ctrl(d: Derivation, sigma: tuple) -> np.ndarray:
    scrut, pats, bodies = ctrl_parts(d)
    info = d.info
    g_s, d_s, d_rest = info["gamma_s"], info["delta_s"], info["delta_rest"]
    sigma_s = sigma[:len(g_s)]
    big_s = mixed_expr_sem(scrut).tensor
    nt = cardinality(d.term.stype)
    n_gs = ctx_dim(g_s)
    n_ds = ctx_dim(d_s)
    n_dr = ctx_dim(d_rest)
    gs_index = valuation_index(g_s, sigma_s) if g_s else 0
    # probability p[v, tau] of scrutinee outcome v on input (sigma_s, tau)
    diag_idx = gs_index * n_ds + np.arange(n_ds)
    probs = np.zeros((nt, n_ds))
    for v in range(nt):
        probs[v] = np.real(big_s[v, v, diag_idx, diag_idx])
    out = np.zeros((cardinality(d.type), n_ds * n_dr), dtype=complex)
    for pd, bd, gj in zip(pats, bodies, info["pattern_ctxs"]):
        pmat = pure_expr_sem(pd, ())  # |V(T)| x |V(Gamma_j)|
        for k, sj in enumerate(valuations(gj)):
            weights = np.conj(pmat[:, k]) @ probs  # indexed by tau
            if not np.any(weights):
                continue
            body = pure_expr_sem(bd, sigma + sj).reshape(-1, n_ds, n_dr)
            out += (body * weights[None, :, None]).reshape(out.shape)
    return out


# ---------------------------------------------------------------------------
# Mixed expressions
# ---------------------------------------------------------------------------


def mixed_expr_sem(d: Derivation) -> Superoperator:
    """Superoperator of ``Delta ||- e : T``."""
    if d.kind != MIXED:
        raise ValueError("mixed_expr_sem needs a mixed expression derivation")
    if d not in _MIXED_CACHE:
        _MIXED_CACHE[d] = _mixed(d)
    return _MIXED_CACHE[d]


def _conj_pair(e: np.ndarray) -> np.ndarray:
    return np.einsum("ac,bd->abcd", e, np.conj(e))


def _mixed(d: Derivation) -> Superoperator:
    r = d.rule
    if r == "TMix":
        (p,) = d.premises
        return Superoperator(_conj_pair(pure_expr_sem(p, ())))
    if r == "TMixedPerm":
        (p,) = d.premises
        inner = mixed_expr_sem(p).tensor
        dims = _dims(p.delta)
        t = inner.shape[0]
        n = len(dims)
        x = inner.reshape([t, t] + dims + dims)
        pi = d.info["pi"]
        x = np.transpose(x, [0, 1] + [2 + k for k in pi] + [2 + n + k for k in pi])
        dim = ctx_dim(d.delta)
        return Superoperator(x.reshape(t, t, dim, dim))
    if r == "TMixedPair":
        p0, p1 = d.premises
        s0, s1 = mixed_expr_sem(p0).tensor, mixed_expr_sem(p1).tensor
        s = ctx_dim(d.info["shared"])
        a = ctx_dim(d.info["delta0"])
        b = ctx_dim(d.info["delta1"])
        t0, t1 = s0.shape[0], s1.shape[0]
        out = np.einsum("xXsaSA,yYsbSB->xyXYsabSAB",
                        s0.reshape(t0, t0, s, a, s, a), s1.reshape(t1, t1, s, b, s, b))
        return Superoperator(out.reshape(t0 * t1, t0 * t1, s * a * b, s * a * b))
    if r == "TTry":
        p0, p1 = d.premises
        s0, s1 = mixed_expr_sem(p0).tensor, mixed_expr_sem(p1).tensor
        n0, n1 = s0.shape[2], s1.shape[2]
        t = s0.shape[0]
        tr0 = np.einsum("aacd->cd", s0)
        fail = np.eye(n0) - tr0
        out = (np.einsum("abce,df->abcdef", s0, np.eye(n1))
               + np.einsum("ce,abdf->abcdef", fail, s1))
        return Superoperator(out.reshape(t, t, n0 * n1, n0 * n1))
    if r == "TMixedApp":
        pf, pa = d.premises
        return mixed_prog_sem(pf).compose(mixed_expr_sem(pa))
    raise ValueError(f"not a mixed expression rule: {r}")


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


def pure_prog_sem(d: Derivation) -> np.ndarray:
    """Matrix of ``|- f : T ~> T'`` (shape |V(T')| x |V(T)|)."""
    if d.kind != PROG or not isinstance(d.type, S.Coherent):
        raise ValueError("pure_prog_sem needs a coherent program derivation")
    if d not in _PROG_CACHE:
        _PROG_CACHE[d] = _pure_prog(d)
    return _PROG_CACHE[d]


def _pure_prog(d: Derivation) -> np.ndarray:
    f, r = d.term, d.rule
    if r == "TGate":
        return u3_matrix(S.eval_real(f.theta), S.eval_real(f.phi), S.eval_real(f.lam))
    if r == "TLeft":
        return injection_matrix(f.t0, f.t1, right=False)
    if r == "TRight":
        return injection_matrix(f.t0, f.t1, right=True)
    if r == "TPureAbs":
        pd, bd = d.premises
        return pure_expr_sem(bd, ()) @ np.conj(pure_expr_sem(pd, ())).T
    if r == "TRphase":
        (pd,) = d.premises
        p = pure_expr_sem(pd, ())
        proj = p @ np.conj(p).T
        a, b = np.exp(1j * S.eval_real(f.r_match)), np.exp(1j * S.eval_real(f.r_other))
        return a * proj + b * (np.eye(proj.shape[0]) - proj)
    raise ValueError(f"not a pure program rule: {r}")


def mixed_prog_sem(d: Derivation) -> Superoperator:
    """Superoperator of ``|- f : T => T'`` (coherent derivations are lifted)."""
    if d.kind != PROG:
        raise ValueError("mixed_prog_sem needs a program derivation")
    d = as_channel(d)
    if d.rule == "TChannel":
        return Superoperator(_conj_pair(pure_prog_sem(d.premises[0])))
    if d.rule == "TMixedAbs":
        if d not in _PROG_CACHE:
            pd, bd = d.premises
            p = pure_expr_sem(pd, ())
            nd, n0 = ctx_dim(d.info["delta"]), ctx_dim(d.info["delta0"])
            p3 = p.reshape(p.shape[0], nd, n0)
            body = mixed_expr_sem(bd).tensor
            _PROG_CACHE[d] = Superoperator(np.einsum("abxy,vxz,wyz->abvw", body, np.conj(p3), p3))
        return _PROG_CACHE[d]
    raise ValueError(f"not a program rule: {d.rule}")


# ---------------------------------------------------------------------------
# Conveniences
# ---------------------------------------------------------------------------


def denote(term_or_derivation):
    """Denotation of a closed term: matrix for pure judgments, superoperator for mixed."""
    d = term_or_derivation
    if not isinstance(d, Derivation):
        d = infer(d)
    if d.kind == PURE:
        return pure_expr_sem(d, ())
    if d.kind == MIXED:
        return mixed_expr_sem(d)
    if isinstance(d.type, S.Coherent):
        return pure_prog_sem(d)
    return mixed_prog_sem(d)


def as_superoperator(d: Derivation) -> Superoperator:
    """Mixed view of any closed derivation (pure matrices are conjugated)."""
    if d.kind == PURE:
        return Superoperator(_conj_pair(pure_expr_sem(d, ())))
    if d.kind == MIXED:
        return mixed_expr_sem(d)
    return mixed_prog_sem(d)


def pattern_matrices(t: S.DataType, patterns) -> list:
    """Matrices of ``() ; Gamma_j |- e_j : t`` for each pattern (contexts inferred)."""
    return [pure_expr_sem(infer_pure_expr((), infer_ctx(p, t), p), ()) for p in patterns]


def spanning_sum(t: S.DataType, patterns) -> np.ndarray:
    """``sum_j E_j E_j^dag`` for a list of patterns."""
    n = cardinality(t)
    out = np.zeros((n, n), dtype=complex)
    for m in pattern_matrices(t, patterns):
        out += m @ np.conj(m).T
    return out


def state_of(d: Derivation) -> np.ndarray:
    """Output density of a closed expression (empty context)."""
    if d.kind == PURE:
        v = pure_expr_sem(d, ())
        return v @ np.conj(v).T
    if d.kind == MIXED:
        return mixed_expr_sem(d).apply(np.ones((1, 1), dtype=complex))
    raise ValueError("state_of needs an expression derivation")


__all__ = [
    "pure_expr_sem", "mixed_expr_sem", "pure_prog_sem", "mixed_prog_sem", "denote",
    "as_superoperator", "pattern_matrices", "spanning_sum", "state_of", "u3_matrix",
    "injection_matrix",
]
