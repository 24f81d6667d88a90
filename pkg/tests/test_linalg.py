import json

import numpy as np
import pytest

from qunity.linalg import (
    DimensionError, Superoperator, density, direct_sum, dump_matrix, is_density, is_isometry,
    kraus_check, partial_trace, tensor,
)

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def test_tensor_and_direct_sum_shapes():
    assert tensor(H, np.eye(3)).shape == (6, 6)
    d = direct_sum(H, np.eye(3))
    assert d.shape == (5, 5) and np.allclose(d[:2, :2], H) and np.allclose(d[2:, 2:], np.eye(3))


def test_partial_trace_of_product_state():
    rho = tensor(density([1, 0]), density([0.6, 0.8]))
    assert np.allclose(partial_trace(rho, [2], [2]), density([1, 0]))


def test_kraus_check():
    assert kraus_check(H)
    assert kraus_check(np.array([[1, 0], [0, 0]]))
    assert not kraus_check(2 * np.eye(2))


def test_is_isometry():
    assert is_isometry(np.array([[1], [0]]))
    assert not is_isometry(np.array([[1, 0], [0, 0]]))


def test_superoperator_from_kraus_applies():
    s = Superoperator.from_kraus(H)
    assert np.allclose(s.apply(density([1, 0])), np.full((2, 2), 0.5))
    assert s.is_cp() and s.is_trace_preserving()


def test_measurement_channel():
    s = Superoperator.from_kraus(np.diag([1, 0]), np.diag([0, 1]))
    assert np.allclose(s.apply(density(H[:, 0])), np.eye(2) / 2)


def test_compose():
    s = Superoperator.from_kraus(H)
    assert np.allclose(s.compose(s).apply(density([0, 1])), density([0, 1]))


def test_trace_nonincreasing():
    assert Superoperator.from_kraus(np.diag([1, 0])).is_trace_nonincreasing()
    assert not Superoperator.from_kraus(np.sqrt(2) * np.eye(2)).is_trace_nonincreasing()


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        Superoperator.from_kraus(H).apply(np.eye(3))


def test_is_density():
    assert is_density(np.eye(2) / 2)
    assert not is_density(np.diag([1.5, -0.5]))


def test_dump_matrix_format():
    data = json.loads(dump_matrix(np.array([[1, 1j]])))
    assert data == {"rows": 1, "cols": 2, "data": [[1.0, 0.0], [0.0, 1.0]]}
