import numpy as np
import pytest

from qunity import constructions as C
from qunity.circuit import Circuit, h_gate
from qunity.compiler import circuit_kraus, circuit_superop
from qunity.linalg import direct_sum
from qunity.syntax import BIT, UNIT, VOID, TProd, TSum
from qunity.values import LeftVal, PairVal, RightVal, UNIT_VAL, encodings, value_index, values_of

S2 = 1 / np.sqrt(2)
H = np.array([[1, 1], [1, -1]]) * S2


def kraus(c, dom, cod):
    return circuit_kraus(c, encodings(dom), encodings(cod))


def perm_matrix(dom, cod, f):
    m = np.zeros((len(values_of(cod)), len(values_of(dom))))
    for j, v in enumerate(values_of(dom)):
        m[value_index(cod, f(v)), j] = 1
    return m


def inj(n, k, p):
    """Value of block ``k`` in the right-nested ``n``-ary sum."""
    v = p if k == n - 1 else LeftVal(p)
    for _ in range(k):
        v = RightVal(v)
    return v


def block_of(n, v):
    k = 0
    while k < n - 1 and isinstance(v, RightVal):
        v, k = v.inner, k + 1
    return (k, v) if k == n - 1 else (k, v.inner)


def test_bits_and_sum_of():
    assert C.bits(0) == UNIT and C.bits(1) == BIT and C.bits(2) == TProd(BIT, BIT)
    assert C.sum_of([]) == VOID and C.sum_of([BIT, UNIT]) == TSum(BIT, UNIT)


@pytest.mark.parametrize("t", [BIT, TProd(BIT, BIT), TSum(UNIT, BIT)])
def test_share_copies_basis_states(t):
    want = perm_matrix(t, TProd(t, t), lambda v: PairVal(v, v))
    assert np.allclose(kraus(C.share(t), t, TProd(t, t)), want)


def test_unshare_flags_mismatched_copies():
    got = kraus(C.unshare(BIT), TProd(BIT, BIT), BIT)
    assert np.allclose(got, [[1, 0, 0, 0], [0, 0, 0, 1]])


@pytest.mark.parametrize("t0,t1", [(BIT, UNIT), (UNIT, TProd(BIT, BIT)), (TProd(BIT, BIT), BIT)])
def test_injections(t0, t1):
    s = TSum(t0, t1)
    assert np.allclose(kraus(C.inject_left(t0, t1), t0, s), perm_matrix(t0, s, LeftVal))
    assert np.allclose(kraus(C.inject_right(t0, t1), t1, s), perm_matrix(t1, s, RightVal))


def test_comm():
    t0, t1 = BIT, TProd(BIT, BIT)
    f = lambda v: RightVal(v.inner) if isinstance(v, LeftVal) else LeftVal(v.inner)
    got = kraus(C.comm(t0, t1), TSum(t0, t1), TSum(t1, t0))
    assert np.allclose(got, perm_matrix(TSum(t0, t1), TSum(t1, t0), f))


@pytest.mark.parametrize("ts", [(UNIT, BIT, TProd(BIT, BIT)), (TProd(BIT, BIT), UNIT, BIT),
                                (BIT, TProd(BIT, BIT), UNIT)])
def test_assoc(ts):
    t1, t2, t3 = ts

    def f(v):
        if isinstance(v, RightVal):
            return RightVal(RightVal(v.inner))
        w = v.inner
        return LeftVal(w.inner) if isinstance(w, LeftVal) else RightVal(LeftVal(w.inner))

    dom, cod = TSum(TSum(t1, t2), t3), TSum(t1, TSum(t2, t3))
    assert np.allclose(kraus(C.assoc(t1, t2, t3), dom, cod), perm_matrix(dom, cod, f))


def test_dsum_is_block_diagonal():
    had = Circuit(1, (h_gate(0),), (0,), (), (0,))
    c = C.dsum(had, C.share(BIT))
    got = kraus(c, TSum(BIT, BIT), TSum(BIT, TProd(BIT, BIT)))
    copy = perm_matrix(BIT, TProd(BIT, BIT), lambda v: PairVal(v, v))
    assert np.allclose(got, direct_sum(H, copy))


def test_dsum_rejects_garbage():
    with pytest.raises(ValueError):
        C.dsum(C.discard(1, 1), C.discard(1, 1))


def test_zero_map():
    assert np.allclose(kraus(C.zero_map(BIT), BIT, VOID), np.zeros((0, 2)))


def test_left_distributor():
    shapes = [UNIT, BIT, TProd(BIT, BIT)]
    dom = TProd(BIT, C.sum_of(shapes))
    cod = C.sum_of([TProd(BIT, s) for s in shapes])

    def f(v):
        k, p = block_of(3, v.second)
        return inj(3, k, PairVal(v.first, p))

    assert np.allclose(kraus(C.ldistr(BIT, shapes), dom, cod), perm_matrix(dom, cod, f))


def test_right_distributor():
    shapes = [BIT, UNIT]
    dom = TProd(C.sum_of(shapes), BIT)
    cod = C.sum_of([TProd(s, BIT) for s in shapes])

    def f(v):
        k, p = block_of(2, v.first)
        return inj(2, k, PairVal(p, v.second))

    assert np.allclose(kraus(C.rdistr(shapes, BIT), dom, cod), perm_matrix(dom, cod, f))


def test_flatten():
    groups = [[BIT, UNIT], [UNIT], [BIT, BIT]]
    dom = C.sum_of([C.sum_of(g) for g in groups])
    flat = [s for g in groups for s in g]
    cod = C.sum_of(flat)
    offsets = [0, 2, 3]

    def f(v):
        g, inner = block_of(3, v)
        k, p = block_of(len(groups[g]), inner) if len(groups[g]) > 1 else (0, inner)
        return inj(len(flat), offsets[g] + k, p)

    assert np.allclose(kraus(C.flatten_n(groups), dom, cod), perm_matrix(dom, cod, f))


@pytest.mark.parametrize("perm", [(1, 0, 2), (2, 0, 1), (2, 1, 0), (0, 1, 2)])
def test_block_perm(perm):
    t = C.sum_of([BIT] * 3)

    def f(v):
        k, p = block_of(3, v)
        return inj(3, perm.index(k), p)

    assert np.allclose(kraus(C.block_perm(BIT, 3, perm), t, t), perm_matrix(t, t, f))


def test_cptp_wrap_routes_failure_to_extra_branch():
    c = C.cptp_wrap(C.unshare(BIT))
    s = circuit_superop(c, encodings(TProd(BIT, BIT)), encodings(TSum(BIT, UNIT)))
    assert s.is_trace_preserving()
    rho = np.zeros((4, 4))
    rho[1, 1] = 1  # |0, 1>: the copies disagree
    out = s.apply(rho)
    fail = value_index(TSum(BIT, UNIT), RightVal(UNIT_VAL))
    assert np.isclose(out[fail, fail], 1)


def test_pure_error_wrap_is_norm_preserving():
    c, width = C.pure_error_wrap(C.unshare(BIT))
    assert c.flags == ()
    m = circuit_kraus(c, encodings(TProd(BIT, BIT)), list(range(2 ** c.n_out)))
    assert np.allclose(m.conj().T @ m, np.eye(4))
    assert width == 2


def test_discard_is_partial_trace():
    s = circuit_superop(C.discard(1, 1), encodings(TProd(BIT, BIT)), encodings(BIT))
    assert np.allclose(s.apply(np.eye(4) / 4), np.eye(2) / 2)
