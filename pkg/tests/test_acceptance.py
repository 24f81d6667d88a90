"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run under pytest (``pytest tests/test_acceptance.py -v``) or directly
(``python tests/test_acceptance.py``).  Timings start from cold caches.
"""

from __future__ import annotations

import itertools
import math
import sys
import time
from dataclasses import dataclass

import numpy as np
import pytest

from qunity import syntax as S
from qunity.circuit import Controlled, U3
from qunity.classical import CLAUSES, CoincidenceReport, check_coincidence
from qunity.compiler import compile_derivation, verify
from qunity.corpus import ENTRIES, entries, entry, load
from qunity.expand import expand, expand_text
from qunity.linalg import kraus_check
from qunity.semantics import as_superoperator, denote, mixed_expr_sem, pattern_matrices, state_of
from qunity.typecheck import (
    MIXED, PROG, PURE, Derivation, as_mixed, check_iso, clear_caches, infer, infer_mixed_expr,
    infer_pure_expr, iter_derivations, spanning_type, validate,
)
from qunity.values import cardinality, value_index, values_of

DENSE_CAP = 22


@dataclass
class Outcome:
    number: int
    title: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} criterion {self.number} ({self.title}): {self.detail}"


def fresh(e) -> Derivation:
    """A derivation built from scratch, so timings include type checking."""
    return infer(e.term())


def _max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


# ---------------------------------------------------------------------------
# 1. Deutsch
# ---------------------------------------------------------------------------


def criterion_1() -> Outcome:
    clear_caches()
    start = time.perf_counter()
    expected = {"const0": 0, "const1": 0, "ident": 1, "negate": 1}
    worst = 0.0
    for f, bit in expected.items():
        rho = state_of(fresh(entry(f"deutsch({f})")))
        want = np.zeros((2, 2))
        want[bit, bit] = 1.0
        worst = max(worst, _max_abs(rho - want))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 1.0
    return Outcome(1, "Deutsch", ok, f"max deviation {worst:.2e} over 4 oracles in {elapsed:.3f}s")


# ---------------------------------------------------------------------------
# 2. Typing regressions
# ---------------------------------------------------------------------------

ACCEPT_AT_SMALL_N = [
    ("grover.qunity", "grover(1, marked1)"), ("grover.qunity", "grover(2, marked2)"),
    ("grover.qunity", "grover(3, marked3)"),
    ("qft.qunity", "qft(1)"), ("qft.qunity", "qft(2)"), ("qft.qunity", "qft(3)"),
    ("match.qunity", "flip"), ("match.qunity", "exchange"), ("match.qunity", "embed"),
    ("dsum.qunity", "hx"),
    ("walk.qunity", "walk(1)"), ("walk.qunity", "walk(2)"), ("walk.qunity", "walk(3)"),
    ("walk.qunity", "diffusion(2, leaffirst(1))"), ("walk.qunity", "diffusion(3, leaffirst(2))"),
    ("deutsch_jozsa.qunity", "dj(1, zero(1))"), ("deutsch_jozsa.qunity", "dj(2, parity2)"),
    ("deutsch_jozsa.qunity", "dj(3, first(3))"),
]


def criterion_2() -> Outcome:
    clear_caches()
    start = time.perf_counter()
    problems = []
    for f in ("const0", "const1", "ident", "negate"):
        d = fresh(entry(f"deutsch({f})"))
        if not (d.kind == PURE and d.gamma == () and d.delta == () and d.type == S.BIT):
            problems.append(f"deutsch({f})")
    d = fresh(entry("coin"))
    if not (d.kind == MIXED and d.delta == () and d.type == S.BIT):
        problems.append("coin")
    walk_defs = load("walk.qunity").definitions
    state = expand_text("Coin * Vertex(3)", walk_defs, sort="type")
    d = infer(expand_text("diffusion(1, leaffirst(0))", walk_defs))
    if d.type != S.Coherent(state, state):
        problems.append("diffusion(1)")
    for file, text in ACCEPT_AT_SMALL_N:
        try:
            infer(expand_text(text, load(file).definitions))
        except Exception as exc:  # any failure to type is a regression
            problems.append(f"{text}: {exc}")
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 10.0
    n = 6 + len(ACCEPT_AT_SMALL_N)
    detail = f"{n - len(problems)}/{n} judgments as expected in {elapsed:.2f}s"
    if problems:
        detail += f"; failed: {problems}"
    return Outcome(2, "typing regressions", ok, detail)


# ---------------------------------------------------------------------------
# 3. Compilation correctness
# ---------------------------------------------------------------------------


def _coin_layout_ok(c) -> bool:
    h = U3(math.pi / 2, 0.0, math.pi, c.preps[0])
    names = set()
    for g in c.gates:
        inner, controls = g, ()
        while isinstance(inner, Controlled):
            controls += inner.controls
            inner = inner.inner
        if isinstance(inner, U3) and not controls and (inner.theta, inner.phi, inner.lam) == (h.theta, h.phi, h.lam):
            names.add("H")
        elif (isinstance(inner, U3) and len(controls) == 1 and controls[0][1]
              and (inner.theta, inner.phi, inner.lam) == (math.pi, 0.0, math.pi)):
            names.add("CNOT")
        else:
            names.add(repr(g))
    return (c.n_prep, c.n_flag, c.n_garb) == (2, 0, 1) and names == {"H", "CNOT"}


def criterion_3() -> Outcome:
    clear_caches()
    start = time.perf_counter()
    within, beyond, failures, worst = 0, 0, [], 0.0
    for e in ENTRIES:
        d = fresh(e)
        rep = verify(d, tol=1e-6)
        worst = max(worst, rep.max_deviation)
        if rep.qubits <= DENSE_CAP:
            within += 1
        else:
            beyond += 1
        if not rep.ok:
            failures.append(rep.line(e.name))
    coin_ok = _coin_layout_ok(compile_derivation(fresh(entry("coin"))))
    elapsed = time.perf_counter() - start
    ok = not failures and coin_ok and elapsed < 120.0
    detail = (f"{within} derivations within {DENSE_CAP} qubits and {beyond} beyond all verify, "
              f"max deviation {worst:.2e}; coin layout {'matches' if coin_ok else 'differs'}; "
              f"{elapsed:.2f}s")
    if failures:
        detail += f"; failures: {failures}"
    return Outcome(3, "compilation correctness", ok, detail)


# ---------------------------------------------------------------------------
# 4. Classical coincidence
# ---------------------------------------------------------------------------


def _state_dim(d: Derivation) -> int:
    if d.kind == PROG:
        return max(cardinality(d.type.dom), cardinality(d.type.cod))
    return cardinality(d.type)


def criterion_4() -> Outcome:
    clear_caches()
    start = time.perf_counter()
    total = CoincidenceReport()
    terms = 0
    for e in entries("classical"):
        d = fresh(e)
        if _state_dim(d) > 16:
            continue
        terms += 1
        total.merge(check_coincidence(d, tol=1e-9, max_dim=16))
    elapsed = time.perf_counter() - start
    covered = total.covered()
    ok = terms >= 30 and total.ok and len(covered) == len(CLAUSES) and elapsed < 30.0
    cases = sum(total.counts.values())
    detail = (f"{terms} terms, {cases} basis cases, {len(covered)}/8 clauses exercised, "
              f"{len(total.mismatches)} mismatches in {elapsed:.2f}s")
    return Outcome(4, "classical coincidence", ok, detail)


# ---------------------------------------------------------------------------
# 5. Spanning and orthogonality semantics
# ---------------------------------------------------------------------------


def _ctrl_nodes():
    seen = set()
    for e in ENTRIES:
        for node in iter_derivations(e.derivation()):
            if node.rule == "TCtrl" and id(node.info["ortho"]) not in seen:
                seen.add(id(node.info["ortho"]))
                yield node


def criterion_5() -> Outcome:
    worst_span, worst_ortho, worst_amp, n = 0.0, 0.0, 0.0, 0
    for node in _ctrl_nodes():
        cert = node.info["ortho"]
        t = spanning_type(cert.spanning)
        n += 1
        span = sum(m @ m.conj().T for m in pattern_matrices(t, cert.spanning.patterns))
        worst_span = max(worst_span, _max_abs(span - np.eye(cardinality(t))))
        ms = pattern_matrices(t, cert.patterns)
        total = sum((m @ m.conj().T for m in ms), np.zeros((cardinality(t),) * 2))
        top = float(np.max(np.linalg.eigvalsh(total))) if total.size else 0.0
        worst_ortho = max(worst_ortho, top - 1.0)
        for m in ms:
            worst_amp = max(worst_amp, _max_abs(np.minimum(np.abs(m), np.abs(m - 1))))
    ok = n > 0 and worst_span <= 1e-9 and worst_ortho <= 1e-9 and worst_amp <= 1e-9
    detail = (f"{n} certificates: spanning deviation {worst_span:.2e}, ortho excess over I "
              f"{max(worst_ortho, 0.0):.2e}, non-0/1 amplitude {worst_amp:.2e}")
    return Outcome(5, "spanning and ortho semantics", ok, detail)


# ---------------------------------------------------------------------------
# 6. Well-definedness spot check
# ---------------------------------------------------------------------------


def two_pair_derivations(t0, t1):
    """The pure-pair-then-mix and mix-then-mixed-pair proofs of ``x, y ||- (x, y)``."""
    pair = S.EPair(S.EVar("x"), S.EVar("y"))
    g0, g1 = (("x", t0),), (("y", t1),)
    via_pure = as_mixed(infer_pure_expr((), g0 + g1, pair))
    m0, m1 = infer_mixed_expr(g0, pair.first), infer_mixed_expr(g1, pair.second)
    via_mixed = Derivation("TMixedPair", MIXED, (), g0 + g1, pair, S.TProd(t0, t1), (m0, m1),
                           {"shared": (), "delta0": g0, "delta1": g1})
    return via_pure, via_mixed


def criterion_6() -> Outcome:
    maybe = S.TSum(S.UNIT, S.BIT)
    worst, cases = 0.0, 0
    for t0, t1 in [(S.BIT, S.BIT), (S.BIT, maybe), (maybe, S.TProd(S.BIT, S.BIT))]:
        a, b = two_pair_derivations(t0, t1)
        validate(a)
        validate(b)
        assert (a.premises[0].rule, b.rule) == ("TPurePair", "TMixedPair")
        worst = max(worst, _max_abs(mixed_expr_sem(a).tensor - mixed_expr_sem(b).tensor))
        cases += 1
    ok = worst <= 1e-12
    return Outcome(6, "proof independence", ok, f"{cases} type pairs, max difference {worst:.2e}")


# ---------------------------------------------------------------------------
# 7. Direct-sum law
# ---------------------------------------------------------------------------


def u3_oracle(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s],
                     [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]])


def dsum_oracles(a):
    """Block-diagonal matrices built from the angle list ``a``: the law, and the entrywise square."""
    u0, u1 = u3_oracle(*a[:3]), u3_oracle(*a[3:])
    law = np.zeros((4, 4), dtype=complex)
    law[:2, :2], law[2:, 2:] = u0, u1
    square = np.zeros((4, 4), dtype=complex)
    square[:2, :2], square[2:, 2:] = u0 * u0, u1 * u1
    return law, square


def criterion_7() -> Outcome:
    rng = np.random.default_rng(20240607)
    defs = load("dsum.qunity").definitions
    scale = 1_000_000
    worst, worst_square = 0.0, 0.0
    for _ in range(5):
        nums = rng.integers(0, int(2 * math.pi * scale), size=6)
        lit = [f"{k}/{scale}" for k in nums]
        text = (f"dsum(u3({lit[0]}, {lit[1]}, {lit[2]}), u3({lit[3]}, {lit[4]}, {lit[5]}), "
                "Bit, Bit, Bit, Bit)")
        got = denote(infer(expand_text(text, defs)))
        law, square = dsum_oracles([k / scale for k in nums])
        worst = max(worst, _max_abs(got - law))
        worst_square = max(worst_square, _max_abs(got - square))
    ok = worst <= 1e-9
    detail = f"5 seeded u3 pairs, max deviation from the block-diagonal oracle {worst:.2e}"
    if not ok:
        detail += (f"; the construction denotes the entrywise square of each block "
                   f"(deviation {worst_square:.2e}), see the decisions ledger")
    return Outcome(7, "direct-sum law", ok, detail)


# ---------------------------------------------------------------------------
# 8. QFT
# ---------------------------------------------------------------------------


def dft(n: int) -> np.ndarray:
    size = 2 ** n
    j = np.arange(size)
    return np.exp(2j * np.pi * np.outer(j, j) / size) / np.sqrt(size)


def qubit_permutation(perm) -> np.ndarray:
    """Matrix sending basis bit ``perm[i]`` to position ``i`` (bit 0 most significant)."""
    n = len(perm)
    p = np.zeros((2 ** n, 2 ** n))
    for k in range(2 ** n):
        bits = [(k >> (n - 1 - i)) & 1 for i in range(n)]
        out = sum(bits[perm[i]] << (n - 1 - i) for i in range(n))
        p[out, k] = 1
    return p


PLACEMENTS = {
    "output": lambda p, f: p @ f,
    "input": lambda p, f: f @ p.T,
    "both": lambda p, f: p @ f @ p.T,
}


def find_qft_permutation(q: np.ndarray, n: int, tol: float):
    hits = []
    for perm in itertools.permutations(range(n)):
        p = qubit_permutation(perm)
        for where, place in PLACEMENTS.items():
            if _max_abs(q - place(p, dft(n))) <= tol:
                hits.append((perm, where))
    return hits


def lift_permutation(perm, n: int):
    """Extend a permutation found at n = 2 (identity or reversal) to ``n`` qubits."""
    if tuple(perm) == (0, 1):
        return tuple(range(n))
    if tuple(perm) == (1, 0):
        return tuple(reversed(range(n)))
    raise ValueError(perm)


def criterion_8() -> Outcome:
    tol = 1e-9
    mats = {n: denote(fresh(entry(f"qft({n})"))) for n in (1, 2, 3)}
    unitary = max(_max_abs(m.conj().T @ m - np.eye(len(m))) for m in mats.values())
    hits = find_qft_permutation(mats[2], 2, tol)
    if len(hits) != 1:
        return Outcome(8, "QFT", False, f"unitarity {unitary:.2e}; n=2 search found {hits}")
    perm, where = hits[0]
    perm3 = lift_permutation(perm, 3)
    dev3 = _max_abs(mats[3] - PLACEMENTS[where](qubit_permutation(perm3), dft(3)))
    dev1 = _max_abs(mats[1] - dft(1))
    ok = unitary <= tol and dev3 <= tol and dev1 <= tol
    detail = (f"unitary within {unitary:.2e}; permutation {perm} on {where} sides found at n=2, "
              f"as {perm3} at n=3 deviation {dev3:.2e}")
    return Outcome(8, "QFT", ok, detail)


# ---------------------------------------------------------------------------
# 9. Grover
# ---------------------------------------------------------------------------


def criterion_9() -> Outcome:
    prog = load("grover.qunity")
    d = infer(expand(prog))
    vec = denote(d)[:, 0]
    bit3 = expand_text("Bit^3", sort="type")
    marked = values_of(bit3)[0b101]
    p = float(abs(vec[value_index(bit3, marked)]) ** 2)
    theta = math.asin(1 / math.sqrt(8))
    closed = math.sin(5 * theta) ** 2
    ok = p >= 0.94 and abs(p - closed) <= 0.005
    return Outcome(9, "Grover", ok, f"success probability {p:.4f} (closed form {closed:.4f})")


# ---------------------------------------------------------------------------
# 10 and 11. Iso conjecture and Kraus property
# ---------------------------------------------------------------------------


def closed_derivations():
    """Every closed sub-derivation (programs and context-free expressions) of the corpus."""
    seen = {}
    for e in ENTRIES:
        for node in iter_derivations(e.derivation()):
            if node.kind == PROG or (not node.gamma and not node.delta):
                seen.setdefault((node.kind, S.show(node.term), repr(node.type)), node)
    return list(seen.values())


def _is_pure(d: Derivation) -> bool:
    return d.kind == PURE or (d.kind == PROG and isinstance(d.type, S.Coherent))


def _dom(d: Derivation) -> int:
    return cardinality(d.type.dom) if d.kind == PROG else 1


def criterion_10() -> Outcome:
    accepted, bad, worst = 0, [], 0.0
    for d in closed_derivations():
        if not check_iso(d.term):
            continue
        accepted += 1
        if _is_pure(d):
            m = denote(d)
            dev = _max_abs(m.conj().T @ m - np.eye(m.shape[1]))
        else:
            n = _dom(d)
            dev = abs(np.trace(as_superoperator(d).apply(np.eye(n) / n)) - 1.0)
        worst = max(worst, dev)
        if dev > 1e-9:
            bad.append(S.show(d.term))
    ok = accepted > 0 and not bad
    detail = f"{accepted} iso-accepted terms, max deviation {worst:.2e}"
    if bad:
        detail += f"; counterexamples: {bad}"
    return Outcome(10, "iso conjecture", ok, detail)


def criterion_11() -> Outcome:
    pure, mixed, bad = 0, 0, []
    for d in closed_derivations():
        if _is_pure(d):
            pure += 1
            if not kraus_check(denote(d), tol=1e-9):
                bad.append(S.show(d.term))
        else:
            mixed += 1
            s, n = as_superoperator(d), _dom(d)
            traces = [np.trace(s.apply(np.diag(np.eye(n)[k]))).real for k in range(n)]
            if max(traces) > 1 + 1e-9 or not s.is_trace_nonincreasing(tol=1e-9):
                bad.append(S.show(d.term))
    ok = not bad
    detail = f"{pure} pure denotations are Kraus operators, {mixed} mixed are trace-non-increasing"
    if bad:
        detail += f"; violations: {bad}"
    return Outcome(11, "Kraus property", ok, detail)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: c.__name__)
def test_acceptance(criterion, capsys):
    outcome = criterion()
    with capsys.disabled():
        print(f"\n{outcome.line()}")
    assert outcome.ok, outcome.line()


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    for r in results:
        print(r.line())
    sys.exit(0 if all(r.ok for r in results) else 1)
