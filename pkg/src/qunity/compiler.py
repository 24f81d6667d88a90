"""Compilation of typing derivations to qubit circuits, and circuit verification.

Register conventions for the circuit of a derivation:

* pure expression ``Gamma ; Delta |- e : T``: inputs are the encodings of
  Gamma then Delta (variable by variable); outputs are the *same* Gamma
  qubits followed by T.  Gamma qubits are only ever used as controls.
* mixed expression ``Delta ||- e : T``: inputs Delta, outputs T, plus garbage.
* programs: inputs T, outputs T'.

A pure circuit implements its operator ``E`` exactly when, with preps at
|0>, projecting the flags onto |0> leaves ``E`` on the input/output
registers.  A mixed circuit additionally traces out its garbage.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import syntax as S
from .circuit import (
    Builder, Circuit, Controlled, GlobalPhase, Swap, U3, adjoint, cnot, compose, identity, purify,
    read_register, register_index, _SparseGate, _sparse_run,
)
from .constructions import (
    block_perm, cptp_wrap, dsum, dsum_n, flatten2, flatten_n, inject_left, inject_right,
    ldistr, pure_error_wrap, rdistr, zero_map,
)
from .linalg import Superoperator
from .semantics import mixed_expr_sem, mixed_prog_sem, pure_expr_sem, pure_prog_sem
from .syntax import TProd
from .typecheck import (
    MIXED, PROG, PURE, Derivation, OrthoCert, SPair, SPerm, SSum, SUnit, SVar, SVoid,
    ctrl_parts, erasure_path, infer,
)
from .values import ctx_type, encodings, size

__all__ = [
    "compile_derivation", "compile_term", "compile_ortho", "compile_spanning",
    "circuit_kraus", "circuit_superop", "verify_kraus", "verify_superop", "verify",
    "VerifyReport", "CompileError",
]

VERIFY_TOL = 1e-6


class CompileError(ValueError):
    pass


def _ctx_size(ctx: Sequence) -> int:
    return sum(size(t) for _, t in ctx)


def _blocks(ctx: Sequence) -> list:
    out, k = [], 0
    for _, t in ctx:
        out.append((k, size(t)))
        k += size(t)
    return out


# ---------------------------------------------------------------------------
# Orthogonality and spanning certificates
# ---------------------------------------------------------------------------


def compile_spanning(cert):
    """Circuit ``T -> T^(+n)`` sending each value to its pattern's block; returns (circuit, n)."""
    if isinstance(cert, SVoid):
        return identity(0), 0
    if isinstance(cert, SUnit):
        return identity(0), 1
    if isinstance(cert, SVar):
        return identity(size(cert.type)), 1
    if isinstance(cert, SSum):
        t = cert.type
        cl, nl = compile_spanning(cert.left)
        cr, nr = compile_spanning(cert.right)
        lefts = dsum_n([inject_left(t.left, t.right)] * nl)
        rights = dsum_n([inject_right(t.left, t.right)] * nr)
        return compose(dsum(cl, cr), dsum(lefts, rights), flatten2([t] * nl, [t] * nr)), nl + nr
    if isinstance(cert, SPair):
        t = cert.type
        t0, t1 = t.left, t.right
        cb, m = compile_spanning(cert.base)
        b = Builder()
        w = b.input(size(t))
        w = b.apply(cb, w[:size(t0)]) + w[size(t0):]
        w = b.apply(rdistr([t0] * m, t1), w)
        branch_circuits, groups = [], []
        for branch in cert.branches:
            cj, nj = compile_spanning(branch)
            bj = Builder()
            x = bj.input(size(t))
            x = x[:size(t0)] + bj.apply(cj, x[size(t0):])
            x = bj.apply(ldistr(t0, [t1] * nj), x)
            branch_circuits.append(bj.finish(x))
            groups.append([t] * nj)
        w = b.apply(dsum_n(branch_circuits), w)
        w = b.apply(flatten_n(groups), w)
        return b.finish(w), sum(len(g) for g in groups)
    if isinstance(cert, SPerm):
        ci, n = compile_spanning(cert.inner)
        t = _cert_type(cert.inner)
        return compose(ci, block_perm(t, n, cert.perm)), n
    raise TypeError(cert)


def _cert_type(cert) -> S.DataType:
    if isinstance(cert, SUnit):
        return S.UNIT
    if isinstance(cert, SPerm):
        return _cert_type(cert.inner)
    return cert.type


def compile_ortho(cert: OrthoCert, t: S.DataType) -> Circuit:
    """Circuit ``T -> T^(+m)`` for an orthogonality certificate (m kept patterns)."""
    span, n = compile_spanning(cert.spanning)
    parts = [identity(size(t)) if k else zero_map(t) for k in cert.keep]
    groups = [[t] if k else [] for k in cert.keep]
    return compose(span, dsum_n(parts), flatten_n(groups))


# ---------------------------------------------------------------------------
# Derivations
# ---------------------------------------------------------------------------

_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def compile_derivation(d: Derivation) -> Circuit:
    c = _CACHE.get(d)
    if c is None:
        c = _compile(d)
        _CACHE[d] = c
    return c


def compile_term(term) -> Circuit:
    return compile_derivation(term if isinstance(term, Derivation) else infer(term))


def _compile(d: Derivation) -> Circuit:
    fn = _RULES.get(d.rule)
    if fn is None:
        raise CompileError(f"no compilation for rule {d.rule}")
    return fn(d)


def _unit(d):
    b = Builder()
    g = b.input(_ctx_size(d.gamma))
    return b.finish(g)


def _cvar(d):
    b = Builder()
    g = b.input(_ctx_size(d.gamma))
    names = [x for x, _ in d.gamma]
    start, k = _blocks(d.gamma)[names.index(d.term.name)]
    copy = b.prep(k)
    b.add(*(cnot(g[start + i], copy[i]) for i in range(k)))
    return b.finish(g + copy)


def _qvar(d):
    b = Builder()
    g = b.input(_ctx_size(d.gamma))
    x = b.input(_ctx_size(d.delta))
    return b.finish(g + x)


def _pair(d, pure: bool):
    p0, p1 = d.premises
    c0, c1 = compile_derivation(p0), compile_derivation(p1)
    b = Builder()
    g = b.input(_ctx_size(d.gamma))
    sh = b.input(_ctx_size(d.info["shared"]))
    w0 = b.input(_ctx_size(d.info["delta0"]))
    w1 = b.input(_ctx_size(d.info["delta1"]))
    copy = b.prep(len(sh))
    b.add(*(cnot(s, c) for s, c in zip(sh, copy)))
    o0 = b.apply(c0, g + sh + w0)
    o1 = b.apply(c1, g + copy + w1)
    ng = len(g)
    return b.finish(g + o0[ng:] + o1[ng:])


def _reorder(inputs: tuple, ctx_inner: tuple, pi: Sequence[int]) -> list:
    blocks = _blocks(ctx_inner)
    out = []
    for k in pi:
        start, n = blocks[k]
        out.extend(inputs[start:start + n])
    return out


def _pure_perm(d):
    (p,) = d.premises
    c = compile_derivation(p)
    ng, nd = _ctx_size(p.gamma), _ctx_size(p.delta)
    g_in = _reorder(c.inputs[:ng], p.gamma, d.info["pi_g"])
    d_in = _reorder(c.inputs[ng:ng + nd], p.delta, d.info["pi_d"])
    g_out = _reorder(c.outputs[:ng], p.gamma, d.info["pi_g"])
    return Circuit(c.n, c.gates, tuple(g_in + d_in), c.preps,
                   tuple(g_out) + c.outputs[ng:], c.flags, c.garbage)


def _mixed_perm(d):
    (p,) = d.premises
    c = compile_derivation(p)
    return Circuit(c.n, c.gates, tuple(_reorder(c.inputs, p.delta, d.info["pi"])), c.preps,
                   c.outputs, c.flags, c.garbage)


def _app(d):
    pf, pa = d.premises
    cf, ca = compile_derivation(pf), compile_derivation(pa)
    b = Builder()
    g = b.input(_ctx_size(d.gamma))
    x = b.input(_ctx_size(d.delta))
    out = b.apply(ca, g + x)
    ng = len(g)
    return b.finish(g + b.apply(cf, out[ng:]))


def _mix(d):
    return compile_derivation(d.premises[0])


def _try(d):
    p0, p1 = d.premises
    a = cptp_wrap(compile_derivation(p0))
    c = cptp_wrap(compile_derivation(p1))
    b = Builder()
    w0 = b.input(_ctx_size(d.info["delta0"]))
    w1 = b.input(_ctx_size(d.info["delta1"]))
    a_tag, *a_pay = b.apply(a, w0)
    b_tag, *b_pay = b.apply(c, w1)
    on = ((a_tag, True),)
    b.add(*(Controlled(on, Swap(x, y)) for x, y in zip(a_pay, b_pay)))
    f = b.prep(1)[0]
    b.add(Controlled(((a_tag, True), (b_tag, True)), U3(np.pi, 0.0, np.pi, f)))
    b.flag([f])
    b.discard([a_tag, b_tag] + b_pay)
    return b.finish(a_pay)


def _gate(d):
    f = d.term
    g = U3(S.eval_real(f.theta), S.eval_real(f.phi), S.eval_real(f.lam), 0)
    return Circuit(1, (g,), (0,), (), (0,))


def _left(d):
    return inject_left(d.term.t0, d.term.t1)


def _right(d):
    return inject_right(d.term.t0, d.term.t1)


def _pure_abs(d):
    pd, bd = d.premises
    return compose(adjoint(compile_derivation(pd)), compile_derivation(bd))


def _mixed_abs(d):
    pd, bd = d.premises
    pat = adjoint(compile_derivation(pd))
    body = compile_derivation(bd)
    b = Builder()
    x = b.input(pat.n_in)
    ctx = b.apply(pat, x)
    used = _ctx_size(d.info["delta"])
    b.discard(ctx[used:])
    return b.finish(b.apply(body, ctx[:used]))


def _channel(d):
    return compile_derivation(d.premises[0])


def _rphase(d):
    f = d.term
    r0, r1 = S.eval_real(f.r_match), S.eval_real(f.r_other)
    ef, _ = pure_error_wrap(adjoint(compile_derivation(d.premises[0])))
    b = Builder()
    x = b.input(ef.n_in)
    out = b.apply(ef, x)
    ind = out[0]
    b.add(Controlled(((ind, False),), GlobalPhase(r0)))
    b.add(Controlled(((ind, True),), GlobalPhase(r1)))
    return b.finish(b.apply(adjoint(ef), out))


def _ctrl(d):
    scrut, pats, bodies = ctrl_parts(d)
    info = d.info
    t, t2 = d.term.stype, d.term.rtype
    g_s, g_r, d_s, d_r = info["gamma_s"], info["gamma_rest"], info["delta_s"], info["delta_rest"]
    gjs = info["pattern_ctxs"]
    gj_types = [ctx_type(gj) for gj in gjs]
    delta_type = ctx_type(d_s + d_r)

    b = Builder()
    gs = b.input(_ctx_size(g_s))
    gr = b.input(_ctx_size(g_r))
    ds = b.input(_ctx_size(d_s))
    dr = b.input(_ctx_size(d_r))
    gcopy = b.prep(len(gs))
    dcopy = b.prep(len(ds))
    b.add(*(cnot(a, c) for a, c in zip(gs, gcopy)))
    b.add(*(cnot(a, c) for a, c in zip(ds, dcopy)))

    # measure-free evaluation of the scrutinee on the copies
    cs = purify(compile_derivation(scrut))
    out = b.apply(cs, gcopy + dcopy)
    tw, junk = out[:size(t)], out[size(t):]
    orth = compile_ortho(info["ortho"], t)
    sw = b.apply(orth, tw)
    unpattern = dsum_n([adjoint(compile_derivation(p)) for p in pats])
    gw = b.apply(unpattern, sw)
    sums = b.apply(ldistr(delta_type, gj_types), ds + dr + gw)

    ng, nd = len(gs) + len(gr), len(ds) + len(dr)
    wrappers = []
    for bd, gj in zip(bodies, gjs):
        cb = compile_derivation(bd)
        k = _ctx_size(gj)
        # body inputs [Gamma][Gamma_j][Delta] -> [Gamma][Delta][Gamma_j]
        order = list(range(ng)) + list(range(ng + k, ng + k + nd)) + list(range(ng, ng + k))
        cb = cb.with_inputs(order)
        # body outputs [Gamma][Gamma_j][T'] -> [Gamma][T'][Gamma_j]
        st2 = size(t2)
        order = list(range(ng)) + list(range(ng + k, ng + k + st2)) + list(range(ng, ng + k))
        wrappers.append(cb.with_outputs(order))
    res = b.apply(dsum_n(wrappers, ext=ng), gs + gr + sums)
    gs, gr, sums = res[:len(gs)], res[len(gs):ng], res[ng:]
    res = b.apply(adjoint(ldistr(t2, gj_types)), sums)
    tw2, gsum = res[:size(t2)], res[size(t2):]
    sw = b.apply(dsum_n([compile_derivation(p) for p in pats]), gsum)
    tw = b.apply(adjoint(orth), sw)
    back = b.apply(adjoint(cs), tw + junk)
    gcopy, dcopy = back[:len(gcopy)], back[len(gcopy):]

    b.add(*(cnot(a, c) for a, c in zip(gs, gcopy)))
    b.flag(gcopy)
    for (x, tx), (start, k) in zip(d_s, _blocks(d_s)):
        if not pats:
            # no branches: the operator is zero, every path is already flagged
            b.flag(dcopy[start:start + k])
            continue
        lo, ty = _subrange(t2, erasure_path(info["erases"][x]))
        if size(ty) != k:
            raise CompileError(f"erasure of {x} points at a component of the wrong size")
        b.add(*(cnot(tw2[lo + i], dcopy[start + i]) for i in range(k)))
        b.flag(dcopy[start:start + k])
    return b.finish(gs + gr + tw2)


def _subrange(t: S.DataType, path: Sequence[int]):
    lo = 0
    for step in path:
        if not isinstance(t, TProd):
            raise CompileError("erasure path through a non-product type")
        if step == 1:
            lo += size(t.left)
            t = t.right
        else:
            t = t.left
    return lo, t


_RULES = {
    "TUnit": _unit, "TCvar": _cvar, "TQvar": _qvar,
    "TPurePair": lambda d: _pair(d, True), "TMixedPair": lambda d: _pair(d, False),
    "TPurePerm": _pure_perm, "TMixedPerm": _mixed_perm,
    "TPureApp": _app, "TMixedApp": _app, "TMix": _mix, "TTry": _try, "TCtrl": _ctrl,
    "TGate": _gate, "TLeft": _left, "TRight": _right, "TPureAbs": _pure_abs,
    "TMixedAbs": _mixed_abs, "TChannel": _channel, "TRphase": _rphase,
}


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def _columns(c: Circuit, in_codes: Sequence[int]):
    """Sparse output states of ``c`` for each input encoding (preps at |0>)."""
    gates = [_SparseGate(g, c.n) for g in c.gates]
    for code in in_codes:
        yield _sparse_run(gates, {register_index(c.n, c.inputs, code): 1.0 + 0j})


def circuit_kraus(c: Circuit, in_codes: Sequence[int], out_codes: Sequence[int]) -> np.ndarray:
    """Operator implemented by a garbage-free circuit between the given encodings."""
    if c.garbage:
        raise ValueError("circuit_kraus needs a garbage-free circuit")
    row = {code: i for i, code in enumerate(out_codes)}
    m = np.zeros((len(out_codes), len(in_codes)), dtype=complex)
    for j, state in enumerate(_columns(c, in_codes)):
        for idx, amp in state.items():
            if read_register(c.n, c.flags, idx):
                continue
            i = row.get(read_register(c.n, c.outputs, idx))
            if i is not None:
                m[i, j] += amp
    return m


def circuit_superop(c: Circuit, in_codes: Sequence[int], out_codes: Sequence[int]) -> Superoperator:
    """Superoperator implemented by ``c`` (garbage traced out, flags projected on |0>)."""
    row = {code: i for i, code in enumerate(out_codes)}
    cols = []
    keys: dict = {}
    for state in _columns(c, in_codes):
        col = {}
        for idx, amp in state.items():
            if read_register(c.n, c.flags, idx):
                continue
            i = row.get(read_register(c.n, c.outputs, idx))
            if i is None:
                continue
            g = keys.setdefault(read_register(c.n, c.garbage, idx), len(keys))
            col[(i, g)] = col.get((i, g), 0) + amp
        cols.append(col)
    a = np.zeros((len(in_codes), len(out_codes), max(len(keys), 1)), dtype=complex)
    for j, col in enumerate(cols):
        for (i, g), amp in col.items():
            a[j, i, g] = amp
    return Superoperator(np.einsum("axg,byg->xyab", a, np.conj(a)))


def verify_kraus(c: Circuit, e: np.ndarray, dom: S.DataType, cod: S.DataType,
                 tol: float = VERIFY_TOL) -> float:
    """Max deviation between ``c`` and the matrix ``e : H(dom) -> H(cod)``; raises above ``tol``."""
    dev = _deviation(circuit_kraus(c, encodings(dom), encodings(cod)), e)
    if dev > tol:
        raise AssertionError(f"circuit deviates from the operator by {dev:.3e}")
    return dev


def verify_superop(c: Circuit, s: Superoperator, dom: S.DataType, cod: S.DataType,
                   tol: float = VERIFY_TOL) -> float:
    dev = _deviation(circuit_superop(c, encodings(dom), encodings(cod)).tensor, s.tensor)
    if dev > tol:
        raise AssertionError(f"circuit deviates from the superoperator by {dev:.3e}")
    return dev


def _deviation(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a - b))) if a.size else 0.0


@dataclass
class VerifyReport:
    ok: bool
    max_deviation: float
    kind: str
    qubits: int

    def line(self, label: str = "circuit") -> str:
        verdict = "PASS" if self.ok else "FAIL"
        return f"{verdict} {label}: max deviation {self.max_deviation:.3e} ({self.kind}, {self.qubits} qubits)"


def expected_operator(d: Derivation):
    """The denotation of ``d`` as (operator, domain type, codomain type).

    For a pure expression with classical context Gamma the operator is the
    controlled map ``sum_sigma |sigma><sigma| (x) [[e]]sigma`` on
    ``Gamma (x) Delta -> Gamma (x) T``.
    """
    if d.kind == PURE:
        from .values import valuations

        gt, dt = ctx_type(d.gamma), ctx_type(d.delta)
        sigmas = valuations(d.gamma)
        blocks = [pure_expr_sem(d, s) for s in sigmas]
        nt = blocks[0].shape[0] if blocks else 0
        nd = blocks[0].shape[1] if blocks else 0
        m = np.zeros((len(sigmas) * nt, len(sigmas) * nd), dtype=complex)
        for k, blk in enumerate(blocks):
            m[k * nt:(k + 1) * nt, k * nd:(k + 1) * nd] = blk
        return m, TProd(gt, dt) if d.gamma else dt, TProd(gt, d.type) if d.gamma else d.type
    if d.kind == MIXED:
        return mixed_expr_sem(d), ctx_type(d.delta), d.type
    if isinstance(d.type, S.Coherent):
        return pure_prog_sem(d), d.type.dom, d.type.cod
    return mixed_prog_sem(d), d.type.dom, d.type.cod


def verify(d: Derivation, circuit: Circuit | None = None, tol: float = VERIFY_TOL) -> VerifyReport:
    """Compare the circuit of ``d`` (or ``circuit``) against the denotation of ``d``."""
    c = compile_derivation(d) if circuit is None else circuit
    e, dom, cod = expected_operator(d)
    if isinstance(e, Superoperator):
        got = circuit_superop(c, encodings(dom), encodings(cod)).tensor
        dev, kind = _deviation(got, e.tensor), "superoperator"
    elif c.garbage:
        got = circuit_superop(c, encodings(dom), encodings(cod)).tensor
        want = np.einsum("ac,bd->abcd", e, np.conj(e))
        dev, kind = _deviation(got, want), "superoperator"
    else:
        dev, kind = _deviation(circuit_kraus(c, encodings(dom), encodings(cod)), e), "kraus"
    return VerifyReport(dev <= tol, dev, kind, c.n)
