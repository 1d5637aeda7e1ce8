"""Takagi factorisation of complex symmetric matrices, A = U diag(values) U^T."""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
import scipy.linalg

from services.errors import SymmetryError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-6
DEGENERACY_GAP = 1e-10
NULL_THRESHOLD = 1e-12


class TakagiDecomposition(NamedTuple):
    values: np.ndarray
    modes: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.modes * self.values) @ self.modes.T

    def truncated(self, threshold: float) -> tuple[TakagiDecomposition, float]:
        """Keep values above `threshold`; also return the discarded sum of squares."""
        keep = self.values > threshold
        dropped = float(np.sum(self.values[~keep] ** 2))
        return TakagiDecomposition(self.values[keep], self.modes[:, keep]), dropped


def _degenerate_blocks(values: np.ndarray) -> list[list[int]]:
    scale = values[0] if values.size and values[0] > 0 else 1.0
    blocks: list[list[int]] = []
    for index, value in enumerate(values):
        if blocks and values[blocks[-1][-1]] - value <= DEGENERACY_GAP * scale:
            blocks[-1].append(index)
        else:
            blocks.append([index])
    return blocks


def takagi(matrix: np.ndarray) -> TakagiDecomposition:
    """Factorise a complex symmetric matrix.

    The singular value decomposition A = V S W^H of a symmetric matrix
    satisfies V_b = conj(W_b) Z_b on each block b of equal singular values,
    with Z_b = V_b^T W_b unitary and symmetric; the Takagi vectors are
    V_b conj(sqrt(Z_b)). Vectors of the null block need no alignment since
    they carry no weight.
    """
    matrix = np.asarray(matrix, dtype=np.complex128)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"takagi needs a square matrix, got shape {matrix.shape}")
    scale = float(np.max(np.abs(matrix))) if matrix.size else 0.0
    asymmetry = float(np.max(np.abs(matrix - matrix.T))) if matrix.size else 0.0
    if asymmetry > SYMMETRY_TOLERANCE * max(scale, 1.0):
        raise SymmetryError(f"matrix is not symmetric (defect {asymmetry:.3e})")
    matrix = 0.5 * (matrix + matrix.T)

    v, values, w_adjoint = np.linalg.svd(matrix)
    w = w_adjoint.conj().T
    modes = v.copy()
    largest = values[0] if values.size else 0.0
    for block in _degenerate_blocks(values):
        if values[block[0]] <= NULL_THRESHOLD * largest:
            continue
        z = v[:, block].T @ w[:, block]
        root = scipy.linalg.sqrtm(z)
        modes[:, block] = v[:, block] @ np.conj(root)
    return TakagiDecomposition(values, modes)


def schmidt_number(values: np.ndarray) -> float:
    """Effective number of pair modes, (sum l^2)^2 / sum l^4; 1 for a product state."""
    weights = np.asarray(values, dtype=np.float64) ** 2
    return float(np.sum(weights) ** 2 / np.sum(weights**2))
