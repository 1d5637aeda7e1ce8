"""Time-domain reference for single scatterings: virtual-cavity master equation.

An input pulse u(t) is injected by a fictitious cavity whose coupling
g(t) = conj(u(t)) / sqrt(1 - int |u|^2) makes it emit exactly that mode. The
cavity output drives the emitter in cascade, so on the six-dimensional space
(cavity n = 0, 1, 2) x (emitter g, e), basis index 2 n + e,

    H = delta s+ s- + (i/2) sqrt(gamma) (g a^dag s- - conj(g) s+ a)
    L = conj(g) a + sqrt(gamma) s-

and <L(t)> / <L(t1) L(t2)> are the one- and two-photon output amplitudes.
The emitted-norm integral starts at the left edge of the time window.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.fft
from scipy.integrate import cumulative_trapezoid

from services.emitter_scattering import EnergyShell, ScatterKernel, bound_term, scatter_two_photon
from services.errors import CalibrationError, IntegrationError
from services.pulse_domain import (
    Domain,
    EmitterParams,
    OnePhotonState,
    SpectralGrid,
    TwoPhotonState,
    gaussian_one_photon,
    make_grid,
    product_two_photon,
    to_frequency,
    to_time,
)
from services.takagi import schmidt_number, takagi

logger = logging.getLogger(__name__)

DIMENSION = 6
_CAVITY_LOWER = np.diag(np.sqrt([1.0, 2.0]), k=1)
A_OP = np.kron(_CAVITY_LOWER, np.eye(2))
SIGMA_MINUS = np.kron(np.eye(3), np.array([[0.0, 1.0], [0.0, 0.0]]))
SIGMA_PLUS = SIGMA_MINUS.T
EXCITED = SIGMA_PLUS @ SIGMA_MINUS

VACUUM = 0
ONE_PHOTON = 2
TWO_PHOTONS = 4


@dataclass(frozen=True)
class OracleOptions:
    grid_m: int = 256
    k_max: float = 16.0
    max_step: float = 0.01
    epsilon: float = 1e-8
    truncation: float = 1e-6
    discard_warning: float = 1e-4

    def grid(self) -> SpectralGrid:
        return make_grid(self.grid_m, self.k_max)


@dataclass(frozen=True, eq=False)
class CouplingProfile:
    values: np.ndarray
    depletion_time: float | None
    unemitted: float


def coupling_profile(times: np.ndarray, u: np.ndarray, epsilon: float = 1e-8) -> CouplingProfile:
    """Virtual-cavity coupling g(t) = conj(u) / sqrt(1 - F(t)) sampled on `times`.

    F is the emitted norm accumulated from times[0], scaled to reach 1 at the
    last sample. Once the remaining norm drops to `epsilon` the coupling is
    frozen at its last valid value; the remaining norm at that point is
    reported as `unemitted`.
    """
    u = np.asarray(u, dtype=np.complex128)
    emitted = cumulative_trapezoid(np.abs(u) ** 2, times, initial=0.0)
    total = emitted[-1]
    if total <= 0.0:
        return CouplingProfile(np.zeros_like(u), None, 0.0)
    remaining = 1.0 - emitted / total
    valid = remaining > epsilon
    values = np.zeros_like(u)
    values[valid] = np.conj(u[valid]) / np.sqrt(remaining[valid])
    if valid.all():
        return CouplingProfile(values, None, 0.0)
    first = int(np.argmin(valid))
    last_valid = first - 1
    values[first:] = values[last_valid] if last_valid >= 0 else 0.0
    unemitted = float(remaining[last_valid]) if last_valid >= 0 else 1.0
    return CouplingProfile(values, float(times[first]), unemitted)


def substeps_for(grid: SpectralGrid, max_step: float) -> int:
    return max(1, math.ceil(grid.dt / min(grid.dt, max_step) - 1e-9))


def fine_samples(mode: OnePhotonState, factor: int) -> np.ndarray:
    """Band-limited samples of the temporal mode at spacing dt / factor.

    Returns m * factor + 1 points from -t_max to +t_max inclusive.
    """
    if mode.domain is Domain.TIME:
        mode = to_frequency(mode)
    grid = mode.grid
    size = grid.m * factor
    spacing = grid.dt / factor
    shifted = mode.amps * np.exp(1j * grid.k * grid.t_max)
    samples = scipy.fft.fft(shifted, n=size)
    samples *= grid.dk / np.sqrt(2.0 * np.pi) * np.exp(1j * grid.k_max * spacing * np.arange(size))
    return np.append(samples, samples[0])


@dataclass(frozen=True, eq=False)
class VirtualCavitySystem:
    """Cavity-plus-emitter system with its coupling sampled at every RK4 node.

    RK4 step s runs from fine index 2s to 2s + 2; lattice time t_j sits at
    step j * substeps.
    """

    grid: SpectralGrid
    emitter: EmitterParams
    coupling: np.ndarray
    substeps: int
    depletion_time: float | None = None
    unemitted: float = 0.0

    def __post_init__(self) -> None:
        expected = 2 * self.grid.m * self.substeps + 1
        if self.coupling.shape != (expected,):
            raise ValueError(f"coupling needs {expected} fine samples, got {self.coupling.shape}")

    @classmethod
    def from_mode(
        cls, mode: OnePhotonState, emitter: EmitterParams, options: OracleOptions | None = None
    ) -> VirtualCavitySystem:
        options = options or OracleOptions()
        substeps = substeps_for(mode.grid, options.max_step)
        u = fine_samples(mode, 2 * substeps)
        times = -mode.grid.t_max + (mode.grid.dt / (2 * substeps)) * np.arange(u.size)
        profile = coupling_profile(times, u, options.epsilon)
        if profile.depletion_time is not None:
            logger.debug(
                "coupling frozen at t=%.3f with %.2e of the pulse left",
                profile.depletion_time,
                profile.unemitted,
            )
        return cls(
            mode.grid,
            emitter,
            profile.values,
            substeps,
            profile.depletion_time,
            profile.unemitted,
        )

    @classmethod
    def idle(
        cls, grid: SpectralGrid, emitter: EmitterParams, options: OracleOptions | None = None
    ) -> VirtualCavitySystem:
        """No pulse: the cavity is decoupled and only the emitter evolves."""
        substeps = substeps_for(grid, (options or OracleOptions()).max_step)
        idle_coupling = np.zeros(2 * grid.m * substeps + 1, dtype=np.complex128)
        return cls(grid, emitter, idle_coupling, substeps)

    @property
    def step(self) -> float:
        return self.grid.dt / self.substeps

    @property
    def total_steps(self) -> int:
        return self.grid.m * self.substeps

    @cached_property
    def operators(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """H, L and L^dag L at every fine node, each of shape (nodes, 6, 6)."""
        g = self.coupling[:, None, None]
        root = np.sqrt(self.emitter.gamma)
        hamiltonian = self.emitter.delta * EXCITED + 0.5j * root * (
            g * (A_OP.T @ SIGMA_MINUS) - np.conj(g) * (SIGMA_PLUS @ A_OP)
        )
        jump = np.conj(g) * A_OP + root * SIGMA_MINUS
        return hamiltonian, jump, np.conj(np.swapaxes(jump, 1, 2)) @ jump

    def jump(self, lattice_index: int) -> np.ndarray:
        return self.operators[1][2 * self.substeps * lattice_index]

    def step_index(self, time: float) -> int:
        position = (time + self.grid.t_max) / self.step
        index = round(position)
        if abs(position - index) > 1e-6 or not 0 <= index <= self.total_steps:
            raise ValueError(f"time {time} is not an integrator node of this system")
        return index


def _lindblad_rhs(states: np.ndarray, system: VirtualCavitySystem, node: int) -> np.ndarray:
    hamiltonian, jump, decay = (op[node] for op in system.operators)
    commutator = hamiltonian @ states - states @ hamiltonian
    dissipator = jump @ states @ jump.conj().T - 0.5 * (decay @ states + states @ decay)
    return -1j * commutator + dissipator


def _propagate(
    states: np.ndarray, system: VirtualCavitySystem, start: int, stop: int
) -> np.ndarray:
    h = system.step
    for step in range(start, stop):
        node = 2 * step
        k1 = _lindblad_rhs(states, system, node)
        k2 = _lindblad_rhs(states + 0.5 * h * k1, system, node + 1)
        k3 = _lindblad_rhs(states + 0.5 * h * k2, system, node + 1)
        k4 = _lindblad_rhs(states + h * k3, system, node + 2)
        states = states + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(states)):
        raise IntegrationError(f"density matrix became non-finite between steps {start} and {stop}")
    return states


def evolve_master(
    rho: np.ndarray, t_from: float, t_to: float, system: VirtualCavitySystem
) -> np.ndarray:
    """Integrate the Lindblad equation for one (or a stack of) 6x6 operators."""
    start, stop = system.step_index(t_from), system.step_index(t_to)
    if stop < start:
        raise ValueError(f"cannot integrate backwards from {t_from} to {t_to}")
    return _propagate(np.asarray(rho, dtype=np.complex128), system, start, stop)


def fock_density(*indices: int) -> np.ndarray:
    """Density matrix of the equal superposition of the given basis states."""
    vector = np.zeros(DIMENSION, dtype=np.complex128)
    vector[list(indices)] = 1.0
    vector /= np.linalg.norm(vector)
    return np.outer(vector, vector.conj())


@dataclass(frozen=True, eq=False)
class TwoTimeWavefunction:
    grid: SpectralGrid
    amps: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2) * self.grid.dt**2))

    def to_state(self) -> TwoPhotonState:
        return TwoPhotonState(self.grid, self.amps, Domain.TIME)


def two_time_wavefunction(system: VirtualCavitySystem) -> TwoTimeWavefunction:
    """sqrt(2) <L(t2) L(t1)> for t1 <= t2 by quantum regression, mirrored below the diagonal.

    Every lattice time t1 spawns a branch L(t1) rho(t1) that is propagated
    alongside the main density matrix.
    """
    m, substeps = system.grid.m, system.substeps
    states = np.zeros((m + 1, DIMENSION, DIMENSION), dtype=np.complex128)
    states[0] = fock_density(VACUUM, TWO_PHOTONS)
    correlations = np.zeros((m, m), dtype=np.complex128)
    for j in range(m):
        jump = system.jump(j)
        states[j + 1] = jump @ states[0]
        correlations[: j + 1, j] = np.einsum("ab,iba->i", jump, states[1 : j + 2])
        if j < m - 1:
            states[: j + 2] = _propagate(states[: j + 2], system, j * substeps, (j + 1) * substeps)
    amps = np.sqrt(2.0) * (correlations + np.triu(correlations, 1).T)
    return TwoTimeWavefunction(system.grid, amps)


def oracle_scatter_one_photon(
    phi: OnePhotonState, emitter: EmitterParams, options: OracleOptions | None = None
) -> OnePhotonState:
    """Output mode 2 <L(t)> for the input (|0> + |1_phi>) / sqrt 2, in the frequency domain."""
    system = VirtualCavitySystem.from_mode(phi, emitter, options)
    m, substeps = phi.grid.m, system.substeps
    rho = fock_density(VACUUM, ONE_PHOTON)
    amps = np.zeros(m, dtype=np.complex128)
    for j in range(m):
        amps[j] = 2.0 * np.trace(system.jump(j) @ rho)
        if j < m - 1:
            rho = _propagate(rho, system, j * substeps, (j + 1) * substeps)
    return to_frequency(OnePhotonState(phi.grid, amps, Domain.TIME))


@dataclass(frozen=True, eq=False)
class OracleScattering:
    """Oracle output in both domains plus the Takagi bookkeeping of the input."""

    state: TwoPhotonState
    temporal: TwoPhotonState
    input_values: np.ndarray
    discarded: float

    def output_spectrum(self) -> np.ndarray:
        return takagi(self.temporal.amps * self.temporal.grid.dt).values

    @property
    def schmidt_number(self) -> float:
        return schmidt_number(self.output_spectrum())


def oracle_scatter_two_photon_detailed(
    psi_in: TwoPhotonState, emitter: EmitterParams, options: OracleOptions | None = None
) -> OracleScattering:
    options = options or OracleOptions()
    grid = psi_in.grid
    temporal = psi_in if psi_in.domain is Domain.TIME else to_time(psi_in)
    kept, discarded = takagi(temporal.amps * grid.dt).truncated(options.truncation)
    if discarded > options.discard_warning:
        logger.warning("Takagi truncation discards %.2e of the pair weight", discarded)
    logger.debug(
        "oracle scattering %d Takagi mode(s), leading value %.6f",
        kept.values.size,
        kept.values[0],
    )

    total = np.zeros((grid.m, grid.m), dtype=np.complex128)
    for value, column in zip(kept.values, kept.modes.T):
        mode = OnePhotonState(grid, column / np.sqrt(grid.dt), Domain.TIME)
        system = VirtualCavitySystem.from_mode(mode, emitter, options)
        total += value * two_time_wavefunction(system).amps
    temporal_out = TwoPhotonState(grid, total, Domain.TIME)
    return OracleScattering(to_frequency(temporal_out), temporal_out, kept.values, discarded)


def oracle_scatter_two_photon(
    psi_in: TwoPhotonState, emitter: EmitterParams, options: OracleOptions | None = None
) -> TwoPhotonState:
    return oracle_scatter_two_photon_detailed(psi_in, emitter, options).state


def check_step_convergence(
    mode: OnePhotonState,
    emitter: EmitterParams,
    options: OracleOptions | None = None,
    tolerance: float = 1e-4,
) -> float:
    """L2 change of the two-time amplitude when the integrator step is halved."""
    options = options or OracleOptions()
    finer = replace(options, max_step=options.max_step / 2.0)
    coarse = two_time_wavefunction(VirtualCavitySystem.from_mode(mode, emitter, options))
    fine = two_time_wavefunction(VirtualCavitySystem.from_mode(mode, emitter, finer))
    change = float(np.sqrt(np.sum(np.abs(coarse.amps - fine.amps) ** 2)) * mode.grid.dt)
    if change >= tolerance:
        raise IntegrationError(f"halving the integrator step changes the output by {change:.3e}")
    return change


@dataclass(frozen=True)
class CalibrationResult:
    constant: complex
    residual: float
    sigma_k: float
    emitter: EmitterParams
    shell: EnergyShell
    grid: SpectralGrid
    grid_delta: float | None = None

    def kernel(self) -> ScatterKernel:
        return ScatterKernel(self.emitter, self.constant, self.shell, True, self.residual)


def fit_bound_constant(
    psi: TwoPhotonState, target: TwoPhotonState, kernel: ScatterKernel
) -> tuple[complex, float]:
    """Least-squares C for target ~ T T psi + C B[psi], and the L2 residual of the fit."""
    linear = scatter_two_photon(psi, kernel.linear_only()).amps
    basis = bound_term(psi, ScatterKernel(kernel.emitter, 1.0 + 0j, kernel.shell))
    weight = float(np.vdot(basis, basis).real)
    if weight == 0.0:
        raise CalibrationError("correlated term vanishes for this input; nothing to calibrate")
    constant = complex(np.vdot(basis, target.amps - linear) / weight)
    mismatch = linear + constant * basis - target.amps
    residual = float(np.sqrt(np.sum(np.abs(mismatch) ** 2)) * psi.grid.dk)
    return constant, residual


def _calibrate_on(
    grid: SpectralGrid,
    sigma_k: float,
    emitter: EmitterParams,
    shell: EnergyShell,
    options: OracleOptions,
) -> CalibrationResult:
    psi = product_two_photon(gaussian_one_photon(grid, sigma_k))
    target = oracle_scatter_two_photon(psi, emitter, options)
    constant, residual = fit_bound_constant(psi, target, ScatterKernel.analytic(emitter, shell))
    logger.info(
        "calibration on m=%d: C=%.8f%+.8fj residual=%.3e",
        grid.m,
        constant.real,
        constant.imag,
        residual,
    )
    return CalibrationResult(constant, residual, sigma_k, emitter, shell, grid)


def calibrate_bound_constant(
    sigma_k: float,
    emitter: EmitterParams,
    shell: EnergyShell = EnergyShell.POLE,
    options: OracleOptions | None = None,
    tolerance: float = 1e-2,
    check_convergence: bool = False,
) -> CalibrationResult:
    """Fit the correlated-term constant against the oracle for a Gaussian pair.

    A residual above `tolerance` triggers one refinement to twice the lattice
    size; if that still misses, the functional form is inadequate and
    CalibrationError is raised.
    """
    options = options or OracleOptions()
    grid = options.grid()
    result = _calibrate_on(grid, sigma_k, emitter, shell, options)
    if result.residual <= tolerance and not check_convergence:
        return result
    if result.residual > tolerance:
        logger.warning(
            "calibration residual %.3e above %.0e, refining to m=%d",
            result.residual,
            tolerance,
            2 * grid.m,
        )
    refined = _calibrate_on(grid.refined(), sigma_k, emitter, shell, options)
    delta = abs(refined.constant - result.constant) / max(abs(result.constant), 1e-300)
    if refined.residual > tolerance and result.residual > tolerance:
        raise CalibrationError(
            f"{shell.value} shell cannot reach residual {tolerance:g} "
            f"(m={grid.m}: {result.residual:.3e}, m={2 * grid.m}: {refined.residual:.3e})"
        )
    best = refined if result.residual > tolerance else result
    return CalibrationResult(
        best.constant, best.residual, sigma_k, emitter, shell, best.grid, delta
    )


@dataclass(frozen=True)
class EquivalencePoint:
    sigma_k: float
    delta: float
    distance: float
    oracle_norm: float
    schmidt_number: float


def equivalence_point(
    sigma_k: float,
    emitter: EmitterParams,
    kernel: ScatterKernel,
    options: OracleOptions | None = None,
) -> EquivalencePoint:
    """L2 distance between the frequency-domain map and the oracle for one Gaussian pair."""
    options = options or OracleOptions()
    psi = product_two_photon(gaussian_one_photon(options.grid(), sigma_k))
    reference = oracle_scatter_two_photon_detailed(psi, emitter, options)
    model = scatter_two_photon(psi, kernel.with_emitter(emitter))
    difference = model.amps - reference.state.amps
    distance = float(np.sqrt(np.sum(np.abs(difference) ** 2)) * psi.grid.dk)
    return EquivalencePoint(
        sigma_k, emitter.delta, distance, reference.state.norm(), reference.schmidt_number
    )
