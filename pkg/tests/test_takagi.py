import numpy as np
import pytest

from services.errors import SymmetryError
from services.takagi import schmidt_number, takagi


def _random_unitary(n, seed):
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.mark.parametrize("n, seed", [(1, 0), (4, 1), (9, 2)])
def test_random_symmetric_matrix_is_reconstructed(n, seed):
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    matrix = raw + raw.T
    result = takagi(matrix)
    np.testing.assert_allclose(result.reconstruct(), matrix, atol=1e-8)
    np.testing.assert_allclose(result.modes.conj().T @ result.modes, np.eye(n), atol=1e-8)
    assert np.all(result.values >= 0)
    assert np.all(np.diff(result.values) <= 1e-12)


def test_degenerate_and_null_blocks():
    unitary = _random_unitary(5, 3)
    values = np.array([2.0, 2.0, 1.0, 0.0, 0.0])
    matrix = (unitary * values) @ unitary.T
    result = takagi(matrix)
    np.testing.assert_allclose(result.values, values, atol=1e-10)
    np.testing.assert_allclose(result.reconstruct(), matrix, atol=1e-8)


def test_identity_is_its_own_factorisation():
    result = takagi(np.eye(3))
    np.testing.assert_allclose(result.values, 1.0)
    np.testing.assert_allclose(result.reconstruct(), np.eye(3), atol=1e-12)


def test_rejects_non_symmetric_and_non_square_input():
    with pytest.raises(SymmetryError):
        takagi(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        takagi(np.ones((2, 3)))


def test_truncation_reports_dropped_weight():
    unitary = _random_unitary(4, 4)
    matrix = (unitary * np.array([0.9, 0.4, 1e-3, 1e-5])) @ unitary.T
    kept, dropped = takagi(matrix).truncated(1e-2)
    assert kept.values.size == 2
    assert kept.modes.shape == (4, 2)
    assert dropped == pytest.approx(1e-6 + 1e-10, rel=1e-6)


@pytest.mark.parametrize(
    "values, expected",
    [
        ([1.0], 1.0),
        ([1.0, 0.0, 0.0], 1.0),
        ([1.0, 1.0], 2.0),
        ([1.0, 1.0, 1.0, 1.0], 4.0),
    ],
)
def test_schmidt_number(values, expected):
    assert schmidt_number(np.array(values)) == pytest.approx(expected)
