"""Low-level qubit circuits with ancilla registers (prep, flag, garbage).

A :class:`Circuit` acts on qubits ``0 .. n-1``.  Its registers are *lists of
qubit labels* rather than contiguous ranges: ``inputs + preps`` and
``outputs + flags + garbage`` are both orderings of all ``n`` qubits.  Because
registers are label lists, re-ordering logical wires never costs gates.

Basis index convention: qubit ``q`` contributes the bit ``1 << (n - 1 - q)``,
so qubit 0 is the most significant bit.  Register values are read in list
order, first label most significant, matching the bitstring encodings of
:func:`qunity.values.encode`.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

DEFAULT_CAP = 22
_SNAP = 1e-15


class CapExceeded(RuntimeError):
    """The dense simulator refuses circuits wider than its qubit cap."""


class AdjointOfImpure(ValueError):
    """Only garbage-free circuits have an adjoint."""


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class U3:
    theta: float
    phi: float
    lam: float
    target: int


@dataclass(frozen=True)
class GlobalPhase:
    r: float


@dataclass(frozen=True)
class Swap:
    a: int
    b: int


@dataclass(frozen=True)
class Controlled:
    controls: tuple  # of (qubit, polarity) with polarity True = on |1>
    inner: "Gate"


Gate = Union[U3, GlobalPhase, Swap, Controlled]

PI = math.pi


def x_gate(q: int) -> U3:
    return U3(PI, 0.0, PI, q)


def h_gate(q: int) -> U3:
    return U3(PI / 2, 0.0, PI, q)


def cnot(control: int, target: int) -> Controlled:
    return Controlled(((control, True),), x_gate(target))


def controlled(g: Gate, controls: Sequence) -> Gate:
    """Add ``controls`` to ``g`` (flattening nested controls)."""
    controls = tuple(controls)
    if not controls:
        return g
    if isinstance(g, Controlled):
        return Controlled(controls + g.controls, g.inner)
    return Controlled(controls, g)


def gate_qubits(g: Gate) -> tuple:
    if isinstance(g, U3):
        return (g.target,)
    if isinstance(g, Swap):
        return (g.a, g.b)
    if isinstance(g, GlobalPhase):
        return ()
    return tuple(q for q, _ in g.controls) + gate_qubits(g.inner)


def map_gate(g: Gate, f) -> Gate:
    """Rename the qubits of ``g`` through the function or mapping ``f``."""
    if not callable(f):
        table = f
        f = table.__getitem__
    if isinstance(g, U3):
        return U3(g.theta, g.phi, g.lam, f(g.target))
    if isinstance(g, Swap):
        return Swap(f(g.a), f(g.b))
    if isinstance(g, GlobalPhase):
        return g
    return Controlled(tuple((f(q), p) for q, p in g.controls), map_gate(g.inner, f))


def inverse_gate(g: Gate) -> Gate:
    if isinstance(g, U3):
        return U3(-g.theta, -g.lam, -g.phi, g.target)
    if isinstance(g, GlobalPhase):
        return GlobalPhase(-g.r)
    if isinstance(g, Swap):
        return g
    return Controlled(g.controls, inverse_gate(g.inner))


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    m = np.array([[c, -np.exp(1j * lam) * s],
                  [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]], dtype=complex)
    m[np.abs(m) < _SNAP] = 0
    return m


# ---------------------------------------------------------------------------
# Circuits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple
    inputs: tuple
    preps: tuple
    outputs: tuple
    flags: tuple = ()
    garbage: tuple = ()

    def __post_init__(self):
        full = set(range(self.n))
        if sorted(self.inputs + self.preps) != sorted(full) or len(self.inputs + self.preps) != self.n:
            raise ValueError("inputs and preps must partition the qubits")
        out = self.outputs + self.flags + self.garbage
        if sorted(out) != sorted(full) or len(out) != self.n:
            raise ValueError("outputs, flags and garbage must partition the qubits")

    @property
    def n_prep(self) -> int:
        return len(self.preps)

    @property
    def n_flag(self) -> int:
        return len(self.flags)

    @property
    def n_garb(self) -> int:
        return len(self.garbage)

    @property
    def n_in(self) -> int:
        return len(self.inputs)

    @property
    def n_out(self) -> int:
        return len(self.outputs)

    def stats(self) -> dict:
        return {"totalQubits": self.n, "n_prep": self.n_prep, "n_flag": self.n_flag,
                "n_garb": self.n_garb, "gates": len(self.gates)}

    def check(self) -> None:
        """Raise if a gate touches an out-of-range qubit or controls its own target."""
        for g in self.gates:
            qs = gate_qubits(g)
            if any(q < 0 or q >= self.n for q in qs):
                raise ValueError(f"gate {g} references a qubit outside 0..{self.n - 1}")
            if len(set(qs)) != len(qs):
                raise ValueError(f"gate {g} repeats a qubit")

    def with_inputs(self, order: Sequence[int]) -> "Circuit":
        """Re-order the logical inputs: new input ``i`` is old input ``order[i]``."""
        return Circuit(self.n, self.gates, tuple(self.inputs[k] for k in order), self.preps,
                       self.outputs, self.flags, self.garbage)

    def with_outputs(self, order: Sequence[int]) -> "Circuit":
        return Circuit(self.n, self.gates, self.inputs, self.preps,
                       tuple(self.outputs[k] for k in order), self.flags, self.garbage)


def identity(k: int) -> Circuit:
    r = tuple(range(k))
    return Circuit(k, (), r, (), r)


def relabel(k: int, order: Sequence[int]) -> Circuit:
    """Gate-free wire permutation: output ``i`` carries input ``order[i]``."""
    r = tuple(range(k))
    return Circuit(k, (), r, (), tuple(order))


def adjoint(c: Circuit) -> Circuit:
    if c.garbage:
        raise AdjointOfImpure("cannot take the adjoint of a circuit with garbage")
    gates = tuple(inverse_gate(g) for g in reversed(c.gates))
    return Circuit(c.n, gates, c.outputs, c.flags, c.inputs, c.preps)


def purify(c: Circuit) -> Circuit:
    """Expose the garbage register as an extra trailing output factor."""
    return Circuit(c.n, c.gates, c.inputs, c.preps, c.outputs + c.garbage, c.flags, ())


def swap_network(src: Sequence[int], dst: Sequence[int]) -> list:
    """Swaps moving the content of wire ``src[k]`` onto wire ``dst[k]`` for every k."""
    holder = {w: k for k, w in enumerate(src)}   # wire -> content id
    where = {k: w for k, w in enumerate(src)}    # content id -> wire
    out = []
    for k, target in enumerate(dst):
        w = where[k]
        if w == target:
            continue
        other = holder[target]
        out.append(Swap(w, target))
        holder[w], holder[target] = other, k
        where[other], where[k] = w, target
    return out


class Builder:
    """Incremental circuit construction over freshly allocated qubit labels."""

    def __init__(self) -> None:
        self.n = 0
        self.gates: list = []
        self.inputs: list = []
        self.preps: list = []
        self.flags: list = []
        self.garbage: list = []

    def _alloc(self, k: int) -> list:
        out = list(range(self.n, self.n + k))
        self.n += k
        return out

    def input(self, k: int) -> list:
        ws = self._alloc(k)
        self.inputs.extend(ws)
        return ws

    def prep(self, k: int) -> list:
        ws = self._alloc(k)
        self.preps.extend(ws)
        return ws

    def add(self, *gates: Gate) -> None:
        self.gates.extend(gates)

    def flag(self, wires: Iterable[int]) -> None:
        self.flags.extend(wires)

    def discard(self, wires: Iterable[int]) -> None:
        self.garbage.extend(wires)

    def place(self, c: Circuit, wire_of: dict, controls: Sequence = ()) -> None:
        """Emit the gates of ``c`` with its qubit ``q`` renamed to ``wire_of[q]``."""
        for g in c.gates:
            self.gates.append(controlled(map_gate(g, wire_of), controls))

    def apply(self, c: Circuit, wires: Sequence[int]) -> list:
        """Run ``c`` on ``wires`` (its inputs); returns the wires carrying its outputs."""
        if len(wires) != c.n_in:
            raise ValueError(f"circuit expects {c.n_in} input wires, got {len(wires)}")
        wire_of = dict(zip(c.inputs, wires))
        wire_of.update(zip(c.preps, self.prep(c.n_prep)))
        self.place(c, wire_of)
        self.flags.extend(wire_of[q] for q in c.flags)
        self.garbage.extend(wire_of[q] for q in c.garbage)
        return [wire_of[q] for q in c.outputs]

    def finish(self, outputs: Sequence[int]) -> Circuit:
        c = Circuit(self.n, tuple(self.gates), tuple(self.inputs), tuple(self.preps),
                    tuple(outputs), tuple(self.flags), tuple(self.garbage))
        return c


def compose(*cs: Circuit) -> Circuit:
    """Sequential composition, first circuit applied first."""
    b = Builder()
    wires = b.input(cs[0].n_in)
    for c in cs:
        wires = b.apply(c, wires)
    return b.finish(wires)


def tensor(*cs: Circuit) -> Circuit:
    """Parallel composition; inputs and outputs are concatenated in order."""
    b = Builder()
    ins = [b.input(c.n_in) for c in cs]
    outs = []
    for c, w in zip(cs, ins):
        outs.extend(b.apply(c, w))
    return b.finish(outs)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


def _flatten(g: Gate):
    controls = ()
    while isinstance(g, Controlled):
        controls = controls + g.controls
        g = g.inner
    return controls, g


def _dense_apply(state: np.ndarray, g: Gate) -> None:
    """Apply ``g`` in place to a tensor of shape (2,)*n + (batch,)."""
    controls, inner = _flatten(g)
    idx = [slice(None)] * state.ndim
    for q, pol in controls:
        idx[q] = 1 if pol else 0
    if isinstance(inner, GlobalPhase):
        state[tuple(idx)] *= np.exp(1j * inner.r)
        return
    if isinstance(inner, U3):
        m = u3_matrix(inner.theta, inner.phi, inner.lam)
        i0, i1 = list(idx), list(idx)
        i0[inner.target], i1[inner.target] = 0, 1
        a, b = state[tuple(i0)].copy(), state[tuple(i1)].copy()
        state[tuple(i0)] = m[0, 0] * a + m[0, 1] * b
        state[tuple(i1)] = m[1, 0] * a + m[1, 1] * b
        return
    if isinstance(inner, Swap):
        i01, i10 = list(idx), list(idx)
        i01[inner.a], i01[inner.b] = 0, 1
        i10[inner.a], i10[inner.b] = 1, 0
        a = state[tuple(i01)].copy()
        state[tuple(i01)] = state[tuple(i10)]
        state[tuple(i10)] = a
        return
    raise TypeError(g)


def simulate_unitary(c: Circuit, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Dense ``2^n x 2^n`` unitary of the circuit (qubit 0 most significant)."""
    if c.n > cap:
        raise CapExceeded(f"circuit has {c.n} qubits; the dense cap is {cap}")
    dim = 2 ** c.n
    state = np.eye(dim, dtype=complex).reshape((2,) * c.n + (dim,))
    for g in c.gates:
        _dense_apply(state, g)
    return state.reshape(dim, dim)


def simulate_dense(c: Circuit, columns: Sequence[int]) -> np.ndarray:
    """Columns of the circuit unitary for the given basis indices, shape (2^n, k)."""
    dim = 2 ** c.n
    state = np.zeros((dim, len(columns)), dtype=complex)
    for j, col in enumerate(columns):
        state[col, j] = 1.0
    state = state.reshape((2,) * c.n + (len(columns),))
    for g in c.gates:
        _dense_apply(state, g)
    return state.reshape(dim, len(columns))


class _SparseGate:
    """A gate pre-compiled to bit masks for the dictionary simulator."""

    __slots__ = ("mask", "want", "kind", "bit", "bit2", "m", "phase")

    def __init__(self, g: Gate, n: int):
        controls, inner = _flatten(g)
        self.mask = 0
        self.want = 0
        for q, pol in controls:
            b = 1 << (n - 1 - q)
            self.mask |= b
            if pol:
                self.want |= b
        if isinstance(inner, U3):
            self.kind = "u"
            self.bit = 1 << (n - 1 - inner.target)
            self.m = u3_matrix(inner.theta, inner.phi, inner.lam)
        elif isinstance(inner, Swap):
            self.kind = "s"
            self.bit = 1 << (n - 1 - inner.a)
            self.bit2 = 1 << (n - 1 - inner.b)
        else:
            self.kind = "p"
            self.phase = np.exp(1j * inner.r)


def _sparse_run(gates: list, state: dict, tol: float = 1e-14) -> dict:
    for sg in gates:
        mask, want = sg.mask, sg.want
        if sg.kind == "p":
            state = {i: (a * sg.phase if (i & mask) == want else a) for i, a in state.items()}
            continue
        if sg.kind == "s":
            b1, b2 = sg.bit, sg.bit2
            new = {}
            for i, a in state.items():
                if (i & mask) == want and bool(i & b1) != bool(i & b2):
                    i ^= b1 | b2
                new[i] = a
            state = new
            continue
        bit, m = sg.bit, sg.m
        m00, m01, m10, m11 = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
        new: dict = defaultdict(complex)
        for i, a in state.items():
            if (i & mask) != want:
                new[i] += a
                continue
            i0, i1 = i & ~bit, i | bit
            if i & bit:
                if m01 != 0:
                    new[i0] += m01 * a
                if m11 != 0:
                    new[i1] += m11 * a
            else:
                if m00 != 0:
                    new[i0] += m00 * a
                if m10 != 0:
                    new[i1] += m10 * a
        state = {i: a for i, a in new.items() if abs(a) > tol}
    return state


def simulate_sparse(c: Circuit, column: int) -> dict:
    """One column of the circuit unitary as a sparse ``{basis index: amplitude}`` map."""
    gates = [_SparseGate(g, c.n) for g in c.gates]
    return _sparse_run(gates, {column: 1.0 + 0j})


def register_index(n: int, wires: Sequence[int], value: int) -> int:
    """Basis index whose bits on ``wires`` spell ``value`` (first wire most significant)."""
    idx = 0
    k = len(wires)
    for pos, w in enumerate(wires):
        if (value >> (k - 1 - pos)) & 1:
            idx |= 1 << (n - 1 - w)
    return idx


def read_register(n: int, wires: Sequence[int], index: int) -> int:
    val = 0
    for w in wires:
        val = (val << 1) | ((index >> (n - 1 - w)) & 1)
    return val


# ---------------------------------------------------------------------------
# Output formats
# ---------------------------------------------------------------------------


def _angle(x: float) -> str:
    for num, den in ((1, 1), (1, 2), (1, 4), (3, 4), (1, 8), (3, 2)):
        for sign in (1, -1):
            if abs(x - sign * PI * num / den) < 1e-12:
                s = "-" if sign < 0 else ""
                n = "" if num == 1 else f"{num}*"
                return f"{s}{n}pi" if den == 1 else f"{s}{n}pi/{den}"
    if abs(x) < 1e-15:
        return "0"
    return repr(float(x))


# stdgates.inc names whose matrices equal U(theta, phi, lambda) exactly.
_STD_NAMES = {(PI / 2, 0.0, PI): "h", (PI, 0.0, PI): "x"}


def _qasm_gate(g: Gate, lines: list) -> None:
    controls, inner = _flatten(g)
    negs = [q for q, pol in controls if not pol]
    for q in negs:
        lines.append(f"x q[{q}];")
    mod = ""
    if len(controls) == 1:
        mod = "ctrl @ "
    elif controls:
        mod = f"ctrl({len(controls)}) @ "
    cq = "".join(f"q[{q}], " for q, _ in controls)
    named = _STD_NAMES.get((inner.theta, inner.phi, inner.lam)) if isinstance(inner, U3) else None
    if named is not None and all(pol for _, pol in controls) and len(controls) <= 2:
        lines.append(f"{'c' * len(controls)}{named} {cq}q[{inner.target}];")
    elif isinstance(inner, U3):
        lines.append(f"{mod}U({_angle(inner.theta)}, {_angle(inner.phi)}, {_angle(inner.lam)}) "
                     f"{cq}q[{inner.target}];")
    elif isinstance(inner, Swap):
        lines.append(f"{mod}swap {cq}q[{inner.a}], q[{inner.b}];")
    else:
        if controls:
            lines.append(f"{mod}gphase({_angle(inner.r)}) {cq[:-2]};")
        else:
            lines.append(f"gphase({_angle(inner.r)});")
    for q in negs:
        lines.append(f"x q[{q}];")


def emit_qasm3(c: Circuit) -> str:
    """OpenQASM 3 text for ``c``; register spans are recorded in header comments."""
    def span(ws):
        return "[" + ", ".join(str(w) for w in ws) + "]"

    lines = [
        "OPENQASM 3.0;",
        'include "stdgates.inc";',
        f"// input qubits: {span(c.inputs)}",
        f"// prep qubits (start in |0>): {span(c.preps)}",
        f"// output qubits: {span(c.outputs)}",
        f"// flag qubits (asserted |0>): {span(c.flags)}",
        f"// garbage qubits (discarded): {span(c.garbage)}",
    ]
    if c.n:
        lines.append(f"qubit[{c.n}] q;")
    for g in c.gates:
        _qasm_gate(g, lines)
    return "\n".join(lines) + "\n"


def _gate_json(g: Gate) -> dict:
    if isinstance(g, U3):
        return {"gate": "U3", "theta": g.theta, "phi": g.phi, "lambda": g.lam, "target": g.target}
    if isinstance(g, GlobalPhase):
        return {"gate": "GlobalPhase", "r": g.r}
    if isinstance(g, Swap):
        return {"gate": "Swap", "a": g.a, "b": g.b}
    return {"gate": "Controlled", "controls": [[q, bool(p)] for q, p in g.controls],
            "inner": _gate_json(g.inner)}


def circuit_json(c: Circuit) -> str:
    return json.dumps({
        "totalQubits": c.n, "inputs": list(c.inputs), "preps": list(c.preps),
        "outputs": list(c.outputs), "flags": list(c.flags), "garbage": list(c.garbage),
        "gates": [_gate_json(g) for g in c.gates],
    })


def gate_counts(c: Circuit) -> dict:
    counts: dict = defaultdict(int)
    for g in c.gates:
        controls, inner = _flatten(g)
        name = type(inner).__name__
        counts[f"{'c' * len(controls)}{name}" if controls else name] += 1
    return dict(counts)
