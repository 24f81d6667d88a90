"""Circuit constructions for the compiler's building blocks.

Every construction returns a :class:`~qunity.circuit.Circuit` implementing a
norm-non-increasing operator between Hilbert spaces of Qunity types, with
values laid out by :func:`qunity.values.encode`.  N-ary direct sums
``S_1 (+) ... (+) S_n`` are encoded as the right-nested sum type
``S_1 + (S_2 + (... + S_n))``; the empty sum is ``Void`` and a one-element
sum is the element itself.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

from .circuit import (
    Builder, Circuit, Controlled, Swap, adjoint, cnot, compose, controlled, identity, relabel,
    swap_network, tensor, x_gate,
)
from .syntax import BIT, UNIT, VOID, DataType, TProd, TSum
from .values import size

__all__ = [
    "bits", "sum_of", "share", "unshare", "inject_left", "inject_right", "comm", "assoc",
    "dsum", "dsum_n", "ldistr", "rdistr", "flatten2", "flatten_n", "zero_map", "block_perm",
    "cptp_wrap", "pure_error_wrap", "discard",
]


def bits(k: int) -> DataType:
    """The shape ``Bit^k`` (``()`` when k = 0)."""
    t: DataType = UNIT
    for i in range(k):
        t = BIT if i == 0 else TProd(BIT, t)
    return t


def sum_of(shapes: Sequence[DataType]) -> DataType:
    shapes = list(shapes)
    if not shapes:
        return VOID
    out = shapes[-1]
    for s in reversed(shapes[:-1]):
        out = TSum(s, out)
    return out


# ---------------------------------------------------------------------------
# Copying and injections
# ---------------------------------------------------------------------------


def share(t: DataType) -> Circuit:
    """``|v> -> |v, v>`` with a ladder of CNOTs onto ``size(t)`` prep qubits."""
    b = Builder()
    src = b.input(size(t))
    dst = b.prep(size(t))
    b.add(*(cnot(s, d) for s, d in zip(src, dst)))
    return b.finish(src + dst)


def unshare(t: DataType) -> Circuit:
    """Adjoint of :func:`share`: ``|v, v> -> |v>`` with the copy flagged."""
    return adjoint(share(t))


def _inject(t0: DataType, t1: DataType, right: bool) -> Circuit:
    s = size(t1 if right else t0)
    m = max(size(t0), size(t1))
    b = Builder()
    payload = b.input(s)
    tag = b.prep(1)[0]
    pad = b.prep(m - s)
    if right:
        b.add(x_gate(tag))
    return b.finish([tag] + payload + pad)


def inject_left(t0: DataType, t1: DataType) -> Circuit:
    return _inject(t0, t1, False)


def inject_right(t0: DataType, t1: DataType) -> Circuit:
    return _inject(t0, t1, True)


def comm(t0: DataType, t1: DataType) -> Circuit:
    """``T0 + T1 -> T1 + T0``: flip the tag, payload stays in place."""
    b = Builder()
    w = b.input(size(TSum(t0, t1)))
    b.add(x_gate(w[0]))
    return b.finish(w)


def _rsh(ws: Sequence[int]) -> list:
    return [Swap(ws[k], ws[k + 1]) for k in range(len(ws) - 2, -1, -1)]


def _lsh(ws: Sequence[int]) -> list:
    return list(reversed(_rsh(ws)))


def assoc(t1: DataType, t2: DataType, t3: DataType) -> Circuit:
    """``(T1 + T2) + T3 -> T1 + (T2 + T3)`` by the tag-shifting construction."""
    s1, s2, s3 = size(t1), size(t2), size(t3)
    nmax = max(s1, s2, s3)
    width = 2 + nmax
    src = size(TSum(TSum(t1, t2), t3))
    tgt = size(TSum(t1, TSum(t2, t3)))
    b = Builder()
    w = b.input(src) + b.prep(width - src)
    head, rest = w[0], w[1:]
    on, off = ((head, True),), ((head, False),)
    b.add(*(controlled(g, on) for g in _rsh(rest)))
    b.add(controlled(x_gate(rest[0]), on))
    b.add(Swap(head, rest[0]))
    b.add(*(controlled(g, off) for g in _lsh(rest)))
    b.flag(w[tgt:])
    return b.finish(w[:tgt])


# ---------------------------------------------------------------------------
# Direct sums
# ---------------------------------------------------------------------------


def dsum(c0: Circuit, c1: Circuit, ext: int = 0) -> Circuit:
    """Direct sum ``E0 (+) E1`` controlled by a tag qubit.

    The first ``ext`` inputs of both circuits are shared pass-through wires
    (a classical register used only as controls) and stay outside the sum.
    Branch 1's output layout is aligned with branch 0's by tag-controlled
    swaps, so both branches leave the sum's payload in the same qubits.
    """
    cs = (c0, c1)
    for c in cs:
        if c.garbage:
            raise ValueError("direct sums need garbage-free circuits")
        if tuple(c.outputs[:ext]) != tuple(c.inputs[:ext]):
            raise ValueError("shared wires must pass through unchanged")
    a = [c.n_in - ext for c in cs]
    out = [c.n_out - ext for c in cs]
    m_in, m_out = max(a), max(out)
    extra = max(0, max(a[i] + cs[i].n_prep for i in range(2)) - m_in)
    b = Builder()
    shared = b.input(ext)
    tag = b.input(1)[0]
    payload = b.input(m_in)
    pool_extra = b.prep(extra)
    layouts = []
    for i, c in enumerate(cs):
        pool = payload[a[i]:] + pool_extra
        wire_of = dict(zip(c.inputs[:ext], shared))
        wire_of.update(zip(c.inputs[ext:], payload[:a[i]]))
        wire_of.update(zip(c.preps, pool[:c.n_prep]))
        b.place(c, wire_of, ((tag, bool(i)),))
        layouts.append([wire_of[q] for q in c.outputs[ext:]] + [wire_of[q] for q in c.flags]
                       + pool[c.n_prep:])
    b.add(*(controlled(s, ((tag, True),)) for s in swap_network(layouts[1], layouts[0])))
    b.flag(layouts[0][m_out:])
    return b.finish(shared + [tag] + layouts[0][:m_out])


def dsum_n(cs: Sequence[Circuit], ext: int = 0) -> Circuit:
    cs = list(cs)
    if not cs:
        return identity(ext)
    if len(cs) == 1:
        return cs[0]
    return dsum(cs[0], dsum_n(cs[1:], ext), ext)


def zero_map(t: DataType) -> Circuit:
    """The zero operator ``H(t) -> H(Void)``: every input qubit is a flag."""
    k = size(t)
    r = tuple(range(k))
    return Circuit(k, (), r, (), (), r)


def ldistr(d: DataType, shapes: Sequence[DataType]) -> Circuit:
    """``D (x) (S_1 (+) ... (+) S_n) -> (D (x) S_1) (+) ... (+) (D (x) S_n)``."""
    shapes = list(shapes)
    sd = size(d)
    if not shapes:
        return zero_map(TProd(d, VOID))
    if len(shapes) == 1:
        return identity(sd + size(shapes[0]))
    rest = sum_of(shapes[1:])
    k = sd + size(TSum(shapes[0], rest))
    move = relabel(k, [sd] + list(range(sd)) + list(range(sd + 1, k)))
    return compose(move, dsum(identity(sd + size(shapes[0])), ldistr(d, shapes[1:])))


def rdistr(shapes: Sequence[DataType], d: DataType) -> Circuit:
    """``(S_1 (+) ... (+) S_n) (x) D -> (S_1 (x) D) (+) ... (+) (S_n (x) D)``."""
    shapes = list(shapes)
    ss, sd = size(sum_of(shapes)), size(d)
    front = relabel(ss + sd, list(range(ss, ss + sd)) + list(range(ss)))
    swaps = [relabel(sd + size(s), list(range(sd, sd + size(s))) + list(range(sd)))
             for s in shapes]
    return compose(front, ldistr(d, shapes), dsum_n(swaps))


def flatten2(left: Sequence[DataType], right: Sequence[DataType]) -> Circuit:
    """``Sum(left) (+) Sum(right) -> Sum(left ++ right)``."""
    left, right = list(left), list(right)
    if not right:
        return adjoint(inject_left(sum_of(left), VOID))
    if not left:
        return adjoint(inject_right(VOID, sum_of(right)))
    if len(left) == 1:
        return identity(size(TSum(left[0], sum_of(right))))
    head, tail = left[0], sum_of(left[1:])
    return compose(assoc(head, tail, sum_of(right)),
                   dsum(identity(size(head)), flatten2(left[1:], right)))


def flatten_n(groups: Sequence[Sequence[DataType]]) -> Circuit:
    """``Sum([Sum(g) for g in groups]) -> Sum(concatenation of groups)``."""
    groups = [list(g) for g in groups]
    if not groups:
        return identity(0)
    if len(groups) == 1:
        return identity(size(sum_of(groups[0])))
    first = groups[0]
    rest = [s for g in groups[1:] for s in g]
    step = dsum(identity(size(sum_of(first))), flatten_n(groups[1:]))
    return compose(step, flatten2(first, rest))


@lru_cache(maxsize=None)
def _swap_adjacent(t: DataType, n: int, k: int) -> Circuit:
    """Exchange blocks k and k+1 of ``t^(+n)``."""
    if k > 0:
        return dsum(identity(size(t)), _swap_adjacent(t, n - 1, k - 1))
    if n == 2:
        return comm(t, t)
    tail = sum_of([t] * (n - 2))
    inner = dsum(comm(t, t), identity(size(tail)))
    a = assoc(t, t, tail)
    return compose(adjoint(a), inner, a)


def block_perm(t: DataType, n: int, perm: Sequence[int]) -> Circuit:
    """Permute the blocks of ``t^(+n)``: output block i is input block ``perm[i]``."""
    cur = list(range(n))
    steps = []
    for i in range(n):
        j = cur.index(perm[i])
        while j > i:
            steps.append(_swap_adjacent(t, n, j - 1))
            cur[j - 1], cur[j] = cur[j], cur[j - 1]
            j -= 1
    if not steps:
        return identity(size(sum_of([t] * n)))
    return compose(*steps)


# ---------------------------------------------------------------------------
# Error handling and discarding
# ---------------------------------------------------------------------------


def _any_flag(b: Builder, flags: Sequence[int], target: int) -> None:
    """Flip ``target`` if any flag qubit is |1>: X, then an all-zero-controlled X."""
    if not flags:
        return
    b.add(x_gate(target))
    b.add(Controlled(tuple((f, False) for f in flags), x_gate(target)))


def _run(b: Builder, c: Circuit, wires: Sequence[int]):
    wire_of = dict(zip(c.inputs, wires))
    wire_of.update(zip(c.preps, b.prep(c.n_prep)))
    b.place(c, wire_of)
    return ([wire_of[q] for q in c.outputs], [wire_of[q] for q in c.flags],
            [wire_of[q] for q in c.garbage])


def cptp_wrap(c: Circuit) -> Circuit:
    """Trace-preserving ``rho -> E(rho) (+) (1 - tr E(rho))`` on ``T' + ()``.

    The flags of ``c`` become garbage; a fresh indicator qubit records
    failure, in which case the output is swapped out for fresh zeros.
    """
    b = Builder()
    ins = b.input(c.n_in)
    ind = b.prep(1)[0]
    outs, flags, garbage = _run(b, c, ins)
    fresh = b.prep(len(outs))
    _any_flag(b, flags, ind)
    if flags:
        b.add(*(Controlled(((ind, True),), Swap(o, z)) for o, z in zip(outs, fresh)))
    b.discard(flags + fresh + garbage)
    return b.finish([ind] + outs)


def pure_error_wrap(c: Circuit):
    """Norm-preserving ``E_f : H -> H' (+) Bit^(size H' + n_flag)`` with ``left^dag E_f = E``.

    Returns the circuit and the width of the flag space.
    """
    if c.garbage:
        raise ValueError("pure error handling needs a garbage-free circuit")
    b = Builder()
    ins = b.input(c.n_in)
    ind = b.prep(1)[0]
    outs, flags, _ = _run(b, c, ins)
    _any_flag(b, flags, ind)
    return b.finish([ind] + outs + flags), len(outs) + len(flags)


def discard(keep: int, drop: int) -> Circuit:
    """Keep the first ``keep`` qubits and send the next ``drop`` to garbage."""
    r = tuple(range(keep + drop))
    return Circuit(keep + drop, (), r, (), r[:keep], (), r[keep:])


def purify_circuit(c: Circuit) -> Circuit:
    from .circuit import purify

    return purify(c)


def tensor_id(c: Circuit, k: int, before: bool = False) -> Circuit:
    """``c (x) I_k`` (or ``I_k (x) c`` when ``before``)."""
    return tensor(identity(k), c) if before else tensor(c, identity(k))
