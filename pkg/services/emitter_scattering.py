"""Scattering of one and two photons off a chirally coupled two-level emitter.

The linear sector is the phase-only transmission

    T(k) = (k - delta - i gamma/2) / (k - delta + i gamma/2)

and a photon pair additionally picks up a correlated term living on the
energy shell E = k + p. With s(x) = 1 / (x - delta + i gamma/2):

    Psi_B(k, p) = C * s(k) s(p) * shell(E) * w(E) * I(E)
    I(E)        = sum_q s(q) s(E - q) psi(q, E - q) dk

The sum runs over exact lattice anti-diagonals (indices i + j = n, pair energy
E_n = -2 k_max + n dk), accumulated in row-major order so the result is
bitwise reproducible. shell(E) is E - 2 delta + i gamma for the pole shell
and 1 for the flat shell.

w(E) is the window correction of the pole shell (1 for the flat shell). With
it every anti-diagonal block of the pole-shell map with the analytic C is
unitary on the truncated lattice itself, so the pair norm does not leak
through the momentum cutoff. It tends to 1 as k_max grows and leaves
Psi_B linear in C.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from services.pulse_domain import (
    Domain,
    EmitterParams,
    OnePhotonState,
    S,
    SpectralGrid,
    TwoPhotonState,
    apply_multiplier,
    require_domain,
)

logger = logging.getLogger(__name__)

REAL_PART_TOLERANCE = 1e-12
# Tables for m = 1024 hold a few tens of MB each.
TABLE_CACHE_SIZE = 4


class EnergyShell(str, Enum):
    POLE = "pole"
    FLAT = "flat"


def default_bound_constant(emitter: EmitterParams, shell: EnergyShell) -> complex:
    """Analytic constant of the correlated term.

    For the pole shell this value makes the two-photon map unitary.
    The flat shell has no unitary constant; its default only sets the scale
    until the oracle fit replaces it.
    """
    if shell is EnergyShell.POLE:
        return 1j * emitter.gamma**2 / (2.0 * np.pi)
    return 1j * emitter.gamma**3 / np.pi


def transmission(k: float | np.ndarray, emitter: EmitterParams) -> complex | np.ndarray:
    detuned = np.asarray(k, dtype=np.float64) - emitter.delta
    half = 0.5j * emitter.gamma
    out = (detuned - half) / (detuned + half)
    return complex(out) if out.ndim == 0 else out


def _resolvent(k: np.ndarray, emitter: EmitterParams) -> np.ndarray:
    return 1.0 / (k - emitter.delta + 0.5j * emitter.gamma)


def _read_only(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


@lru_cache(maxsize=8)
def _antidiagonal_index(m: int) -> np.ndarray:
    return _read_only(np.add.outer(np.arange(m), np.arange(m)))


def pair_energies(grid: SpectralGrid) -> np.ndarray:
    """The 2m - 1 lattice pair energies E_n = k_i + k_j."""
    return -2.0 * grid.k_max + grid.dk * np.arange(2 * grid.m - 1)


def antidiagonal_sums(matrix: np.ndarray) -> np.ndarray:
    """Sum of every anti-diagonal i + j = n of a square matrix, n = 0 .. 2m-2."""
    m = matrix.shape[0]
    index = _antidiagonal_index(m).ravel()
    flat = np.asarray(matrix, dtype=np.complex128).ravel()
    real = np.bincount(index, weights=flat.real, minlength=2 * m - 1)
    imag = np.bincount(index, weights=flat.imag, minlength=2 * m - 1)
    return real + 1j * imag


def lattice_line_weight(grid: SpectralGrid, emitter: EmitterParams) -> np.ndarray:
    """sum_q |s(q) s(E_n - q)|^2 dk along every anti-diagonal."""
    weights = np.abs(_resolvent(grid.k, emitter)) ** 2
    return antidiagonal_sums(np.outer(weights, weights)).real * grid.dk


def window_correction(grid: SpectralGrid, emitter: EmitterParams) -> np.ndarray:
    """Per-energy factor that makes the analytic pole-shell map unitary on the lattice.

    Each anti-diagonal block acts on its own line as identity plus a rank-one
    term with eigenvalue 1 + a_n, a_n = C shell(E_n) times the line weight.
    The momentum cutoff pulls |1 + a_n| slightly off 1; scaling a_n by the
    returned factor keeps only the phase of that eigenvalue. The factor tends
    to 1 as k_max grows.
    """
    constant = default_bound_constant(emitter, EnergyShell.POLE)
    shell = pair_energies(grid) - 2.0 * emitter.delta + 1j * emitter.gamma
    coupling = constant * shell * lattice_line_weight(grid, emitter)
    return np.expm1(1j * np.log1p(coupling).imag) / coupling


@dataclass(frozen=True, eq=False)
class LatticeTables:
    """Per grid and emitter arrays reused by every scattering call."""

    pair_resolvent: np.ndarray
    pair_transmission: np.ndarray
    energy_index: np.ndarray
    window_correction: np.ndarray


@lru_cache(maxsize=TABLE_CACHE_SIZE)
def lattice_tables(grid: SpectralGrid, emitter: EmitterParams) -> LatticeTables:
    s = _resolvent(grid.k, emitter)
    t = transmission(grid.k, emitter)
    logger.debug("building lattice tables m=%d delta=%.6g", grid.m, emitter.delta)
    return LatticeTables(
        pair_resolvent=_read_only(np.outer(s, s)),
        pair_transmission=_read_only(np.outer(t, t)),
        energy_index=_antidiagonal_index(grid.m),
        window_correction=_read_only(window_correction(grid, emitter)),
    )


@dataclass(frozen=True)
class ScatterKernel:
    """Emitter parameters plus the constant C of the correlated term.

    `calibrated` is set once C comes from a fit against the master-equation
    oracle, together with the fit's relative residual.
    """

    emitter: EmitterParams
    bound_constant: complex
    shell: EnergyShell = EnergyShell.POLE
    calibrated: bool = False
    residual: float | None = None

    @classmethod
    def analytic(
        cls, emitter: EmitterParams, shell: EnergyShell = EnergyShell.POLE
    ) -> ScatterKernel:
        return cls(emitter, default_bound_constant(emitter, shell), shell)

    def with_constant(self, constant: complex, residual: float | None = None) -> ScatterKernel:
        return replace(self, bound_constant=complex(constant), calibrated=True, residual=residual)

    def with_emitter(self, emitter: EmitterParams) -> ScatterKernel:
        """Same shell and constant at another detuning."""
        return replace(self, emitter=emitter)

    def linear_only(self) -> ScatterKernel:
        return replace(self, bound_constant=0j)

    def tables(self, grid: SpectralGrid) -> LatticeTables:
        return lattice_tables(grid, self.emitter)


def energy_shell_integral(
    amps: np.ndarray, grid: SpectralGrid, emitter: EmitterParams
) -> np.ndarray:
    """I(E_n) for every lattice pair energy.

    Takes a raw amplitude matrix so the reduction can be checked with inputs
    that are not valid photon pairs.
    """
    pair_resolvent = lattice_tables(grid, emitter).pair_resolvent
    return antidiagonal_sums(pair_resolvent * amps) * grid.dk


def shell_factor(grid: SpectralGrid, kernel: ScatterKernel) -> np.ndarray:
    if kernel.shell is EnergyShell.FLAT:
        return np.ones(2 * grid.m - 1, dtype=np.complex128)
    emitter = kernel.emitter
    return pair_energies(grid) - 2.0 * emitter.delta + 1j * emitter.gamma


def bound_term(psi: TwoPhotonState, kernel: ScatterKernel) -> np.ndarray:
    """Correlated part Psi_B of the scattered pair amplitude, as a matrix."""
    require_domain(psi, Domain.FREQUENCY)
    grid = psi.grid
    tables = kernel.tables(grid)
    per_energy = energy_shell_integral(psi.amps, grid, kernel.emitter)
    per_energy *= shell_factor(grid, kernel)
    if kernel.shell is EnergyShell.POLE:
        per_energy *= tables.window_correction
    return kernel.bound_constant * tables.pair_resolvent * per_energy[tables.energy_index]


def scatter_one_photon(phi: OnePhotonState, kernel: ScatterKernel) -> OnePhotonState:
    require_domain(phi, Domain.FREQUENCY)
    return apply_multiplier(phi, transmission(phi.grid.k, kernel.emitter))


def scatter_two_photon(psi: TwoPhotonState, kernel: ScatterKernel) -> TwoPhotonState:
    require_domain(psi, Domain.FREQUENCY)
    amps = kernel.tables(psi.grid).pair_transmission * psi.amps
    if kernel.bound_constant != 0:
        amps += bound_term(psi, kernel)
    return psi.with_amps(amps)


def alpha_coefficients(emitter: EmitterParams) -> tuple[complex, complex]:
    """First and second order coefficients of log T(k) expanded around k = 0.

    Both are purely imaginary for real detuning: alpha1 is the group delay
    and alpha2 a quadratic spectral phase.
    """
    gamma, delta = emitter.gamma, emitter.delta
    denominator = 4.0 * delta**2 + gamma**2
    alpha1 = 1j * (4.0 * gamma / denominator)
    alpha2 = 1j * (16.0 * gamma * delta / denominator**2)
    return alpha1, alpha2


def group_delay(emitter: EmitterParams) -> float:
    return alpha_coefficients(emitter)[0].imag


def compensate_dispersion(state: S, emitter: EmitterParams, order: int) -> S:
    """Undo the order-1 (delay) or order-2 (chirp) part of the emitter's dispersion."""
    require_domain(state, Domain.FREQUENCY)
    alpha1, alpha2 = alpha_coefficients(emitter)
    if order == 1:
        alpha, power = alpha1, 1
    elif order == 2:
        alpha, power = alpha2, 2
    else:
        raise ValueError(f"dispersion order must be 1 or 2, got {order}")
    if abs(alpha.real) > REAL_PART_TOLERANCE:
        raise ValueError(f"dispersion coefficient {alpha} is not purely imaginary")
    return apply_multiplier(state, np.exp(-1j * alpha.imag * state.grid.k**power))
