"""N-round scatter/trap cascade and the circuit figures of merit derived from it."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from services.emitter_scattering import (
    ScatterKernel,
    alpha_coefficients,
    compensate_dispersion,
    scatter_one_photon,
    scatter_two_photon,
)
from services.errors import DomainMismatchError
from services.pulse_domain import (
    Domain,
    EmitterParams,
    OnePhotonState,
    S,
    SpectralGrid,
    TwoPhotonState,
    gaussian_one_photon,
    product_two_photon,
    require_domain,
)
from services.temporal_trap import TrapParams, apply_trap

logger = logging.getLogger(__name__)


class SorterLayout(str, Enum):
    CASCADE = "cascade"
    REPEATED = "repeated"


@dataclass(frozen=True)
class CompensationFlags:
    delay: bool = True
    second_order: bool = True


@dataclass(frozen=True)
class InputPulse:
    sigma_k: float = 1.0
    k0: float = 0.0


@dataclass(frozen=True)
class CascadeConfig:
    """Everything one cascade run needs. `trap=None` is the trap-free variant."""

    n_rounds: int
    grid: SpectralGrid
    kernel: ScatterKernel
    trap: TrapParams | None = None
    compensation: CompensationFlags = field(default_factory=CompensationFlags)
    pulse: InputPulse = field(default_factory=InputPulse)

    def __post_init__(self) -> None:
        if self.n_rounds < 0:
            raise ValueError(f"n_rounds={self.n_rounds} must not be negative")

    @property
    def emitter(self) -> EmitterParams:
        return self.kernel.emitter


@dataclass(frozen=True)
class MetricsReport:
    n_rounds: int
    overlap: complex
    fidelity: float
    p_success: float
    p_fail: float
    norm_drift: float
    linear_phase: float
    phase_difference: float
    per_round_overlaps: tuple[complex, ...] = ()


@dataclass(frozen=True, eq=False)
class SorterOutput:
    """Unnormalised pair amplitudes leaving the sorter in modes a and b."""

    a_branch: TwoPhotonState
    b_branch: TwoPhotonState
    a_weight: float
    b_weight: float

    @property
    def p_success(self) -> float:
        return 0.5 + 0.5 * self.b_weight


@dataclass(frozen=True)
class RepeatedSorterReport:
    p_success: float
    stage_failures: tuple[float, ...]

    @property
    def p_fail(self) -> float:
        return 1.0 - self.p_success


def input_one_photon(config: CascadeConfig) -> OnePhotonState:
    return gaussian_one_photon(config.grid, config.pulse.sigma_k, config.pulse.k0)


def _advance(
    state: S,
    config: CascadeConfig,
    scatter: Callable[[S, ScatterKernel], S],
    is_last: bool,
) -> S:
    # scatter -> delay -> trap; no trap after the last scattering
    emitter = config.emitter
    state = scatter(state, config.kernel)
    if config.compensation.delay:
        state = compensate_dispersion(state, emitter, 1)
    if is_last:
        return state
    if config.trap is not None:
        chirp = alpha_coefficients(emitter)[1].imag if config.compensation.second_order else 0.0
        return apply_trap(state, config.trap.with_absorbed_chirp(chirp))
    if config.compensation.second_order:
        return compensate_dispersion(state, emitter, 2)
    return state


def cascade_one_photon(config: CascadeConfig) -> OnePhotonState:
    state = input_one_photon(config)
    for index in range(config.n_rounds):
        state = _advance(state, config, scatter_one_photon, index == config.n_rounds - 1)
    return state


def cascade_two_photon(config: CascadeConfig) -> TwoPhotonState:
    state = product_two_photon(input_one_photon(config))
    for index in range(config.n_rounds):
        state = _advance(state, config, scatter_two_photon, index == config.n_rounds - 1)
    return state


def overlap(phi: OnePhotonState, psi: TwoPhotonState) -> complex:
    """O = sum_ij conj(phi_i) conj(phi_j) psi_ij dk^2."""
    require_domain(phi, Domain.FREQUENCY)
    require_domain(psi, Domain.FREQUENCY)
    if phi.grid != psi.grid:
        raise DomainMismatchError(f"states live on different grids: {phi.grid} vs {psi.grid}")
    bra = np.conj(phi.amps)
    return complex(bra @ psi.amps @ bra * phi.grid.dk**2)


def cz_fidelity(overlap_value: complex) -> float:
    return float(abs(0.75 - 0.25 * overlap_value) ** 2)


def sorter_success(overlap_value: complex) -> float:
    return float(0.75 - 0.25 * np.real(overlap_value))


def sorter_failure(overlap_value: complex) -> float:
    return 1.0 - sorter_success(overlap_value)


def assemble_sorter_output(phi: OnePhotonState, psi: TwoPhotonState) -> SorterOutput:
    """Beamsplitter algebra of the sorter on the lattice.

    The pair amplitude in mode a is (phi phi + Psi) / 2 sqrt 2 and in mode b
    (-phi phi + Psi) / 2 sqrt 2. A branch weight is the Fock norm
    2 sum |A|^2 dk^2 of its doubly occupied mode.
    """
    if phi.grid != psi.grid or phi.domain is not psi.domain:
        raise DomainMismatchError("sorter inputs must share grid and domain")
    product = np.outer(phi.amps, phi.amps)
    scale = 1.0 / (2.0 * np.sqrt(2.0))
    a_amps = scale * (product + psi.amps)
    b_amps = scale * (psi.amps - product)
    spacing_sq = psi.spacing**2
    return SorterOutput(
        a_branch=psi.with_amps(a_amps),
        b_branch=psi.with_amps(b_amps),
        a_weight=float(2.0 * np.sum(np.abs(a_amps) ** 2) * spacing_sq),
        b_weight=float(2.0 * np.sum(np.abs(b_amps) ** 2) * spacing_sq),
    )


def repeated_sorter(
    psi: TwoPhotonState,
    kernel: ScatterKernel,
    n_stages: int,
    compensation: CompensationFlags | None = None,
) -> RepeatedSorterReport:
    """Trap-free sorter where a pair still bunched in mode a meets another stage.

    One stage maps psi to (S[psi] + L[psi]) / 2 in mode a and
    (S[psi] - L[psi]) / 2 in mode b, with L the product transmission.
    """
    if n_stages < 1:
        raise ValueError(f"n_stages={n_stages} must be at least 1")
    compensation = compensation or CompensationFlags()
    linear_kernel = kernel.linear_only()
    state = psi
    failures = []
    for _ in range(n_stages):
        full = scatter_two_photon(state, kernel).amps
        linear = scatter_two_photon(state, linear_kernel).amps
        state = state.with_amps(0.5 * (full + linear))
        if compensation.delay:
            state = compensate_dispersion(state, kernel.emitter, 1)
        failures.append(state.norm() ** 2)
    return RepeatedSorterReport(1.0 - 0.5 * failures[-1], tuple(failures))


def evaluate(config: CascadeConfig, layout: SorterLayout = SorterLayout.CASCADE) -> MetricsReport:
    """Run both photon-number sectors in lockstep and reduce them to the figures of merit.

    The repeated sorter layout only changes the success probability of
    trap-free configurations.
    """
    phi_in = input_one_photon(config)
    phi, psi = phi_in, product_two_photon(phi_in)
    drift = 0.0
    per_round = []
    for index in range(config.n_rounds):
        is_last = index == config.n_rounds - 1
        phi = _advance(phi, config, scatter_one_photon, is_last)
        psi = _advance(psi, config, scatter_two_photon, is_last)
        drift = max(drift, abs(1.0 - phi.norm()), abs(1.0 - psi.norm()))
        per_round.append(overlap(phi, psi))
        logger.debug("round %d: O=%s drift=%.3e", index + 1, per_round[-1], drift)

    value = overlap(phi, psi)
    p_success = sorter_success(value)
    if layout is SorterLayout.REPEATED and config.trap is None and config.n_rounds > 0:
        p_success = repeated_sorter(
            product_two_photon(phi_in), config.kernel, config.n_rounds, config.compensation
        ).p_success
    return MetricsReport(
        n_rounds=config.n_rounds,
        overlap=value,
        fidelity=cz_fidelity(value),
        p_success=p_success,
        p_fail=1.0 - p_success,
        norm_drift=drift,
        linear_phase=float(np.angle(phi_in.inner(phi))),
        phase_difference=float(np.angle(value)),
        per_round_overlaps=tuple(per_round),
    )
