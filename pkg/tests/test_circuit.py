import numpy as np
import pytest

from qunity.circuit import (
    Builder, CapExceeded, Circuit, GlobalPhase, Swap, U3, adjoint, cnot, compose, controlled,
    emit_qasm3, gate_counts, h_gate, identity, read_register, register_index, relabel,
    simulate_dense, simulate_sparse, simulate_unitary, swap_network, tensor, x_gate,
)

S2 = 1 / np.sqrt(2)


def test_single_qubit_gates():
    c = Circuit(1, (h_gate(0),), (0,), (), (0,))
    assert np.allclose(simulate_unitary(c), np.array([[1, 1], [1, -1]]) * S2)


def test_cnot_qubit_zero_is_most_significant():
    c = Circuit(2, (cnot(0, 1),), (0, 1), (), (0, 1))
    u = simulate_unitary(c)
    assert np.allclose(u[:, 2], [0, 0, 0, 1])


def test_negative_control():
    g = controlled(x_gate(1), [(0, False)])
    u = simulate_unitary(Circuit(2, (g,), (0, 1), (), (0, 1)))
    assert np.allclose(u[:, 0], [0, 1, 0, 0])


def test_controlled_global_phase_is_relative():
    g = controlled(GlobalPhase(np.pi), [(0, True)])
    u = simulate_unitary(Circuit(1, (g,), (0,), (), (0,)))
    assert np.allclose(u, np.diag([1, -1]))


def test_sparse_matches_dense():
    gates = (h_gate(0), cnot(0, 1), U3(0.3, 0.2, 0.1, 2), controlled(Swap(1, 2), [(0, True)]))
    c = Circuit(3, gates, (0, 1, 2), (), (0, 1, 2))
    dense = simulate_dense(c, [5])[:, 0]
    sparse = simulate_sparse(c, 5)
    for i, a in enumerate(dense):
        assert abs(sparse.get(i, 0) - a) < 1e-12


def test_adjoint_inverts():
    c = Circuit(2, (h_gate(0), cnot(0, 1), U3(0.3, 0.2, 0.1, 1)), (0, 1), (), (0, 1))
    assert np.allclose(simulate_unitary(compose(c, adjoint(c))), np.eye(4))


def test_compose_and_tensor_widths():
    c = Circuit(1, (h_gate(0),), (0,), (), (0,))
    assert tensor(c, identity(2)).n == 3
    assert compose(c, c).n == 1


def test_relabel_is_gate_free():
    r = relabel(3, [2, 0, 1])
    assert r.gates == () and r.outputs == (2, 0, 1)


def test_swap_network_moves_contents():
    state = {0: "a", 1: "b", 2: "c"}
    for s in swap_network([0, 1, 2], [2, 0, 1]):
        state[s.a], state[s.b] = state[s.b], state[s.a]
    assert state == {2: "a", 0: "b", 1: "c"}


def test_register_round_trip():
    idx = register_index(5, [4, 1, 2], 0b101)
    assert read_register(5, [4, 1, 2], idx) == 0b101


def test_partition_is_enforced():
    with pytest.raises(ValueError):
        Circuit(2, (), (0,), (), (0, 1))


def test_dense_cap():
    with pytest.raises(CapExceeded):
        simulate_unitary(identity(23))


def test_builder_tracks_roles():
    b = Builder()
    (a,) = b.input(1)
    (p,) = b.prep(1)
    b.add(cnot(a, p))
    b.discard([p])
    c = b.finish([a])
    assert c.inputs == (a,) and c.preps == (p,) and c.garbage == (p,)


def test_qasm_uses_standard_names():
    c = Circuit(3, (h_gate(0), cnot(0, 1), controlled(x_gate(2), [(0, True), (1, True)])),
                (), (0, 1, 2), (0, 1, 2))
    text = emit_qasm3(c)
    assert "h q[0];" in text and "cx q[0], q[1];" in text and "ccx q[0], q[1], q[2];" in text
    assert text.startswith("OPENQASM 3.0;")


def test_qasm_generic_rotation_and_negative_controls():
    c = Circuit(2, (controlled(U3(0.5, 0.25, 0.125, 1), [(0, False)]),), (0, 1), (), (0, 1))
    lines = emit_qasm3(c).splitlines()
    i = lines.index("x q[0];")
    assert lines[i + 1].startswith("ctrl @ U(") and lines[i + 2] == "x q[0];"


def test_qasm_parses_with_reference_parser():
    openqasm3 = pytest.importorskip("openqasm3")
    c = Circuit(2, (h_gate(0), cnot(0, 1), controlled(GlobalPhase(0.5), [(1, True)])),
                (), (0, 1), (0,), (), (1,))
    openqasm3.parse(emit_qasm3(c))


def test_gate_counts():
    c = Circuit(2, (h_gate(0), cnot(0, 1)), (0, 1), (), (0, 1))
    assert gate_counts(c) == {"U3": 1, "cU3": 1}
