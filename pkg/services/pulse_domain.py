"""Spectral and temporal lattices plus the one- and two-photon state containers.

Momenta are offsets from the pulse carrier in units of the emitter decay rate.
Each state carries a domain tag, and the lattice transform between the two
domains uses the e^{-ikt} kernel with unitary lattice weights:

    psi(t_j) = dk / sqrt(2 pi) * sum_i phi(k_i) exp(-i k_i t_j)

On the centred lattices k_i = -k_max + i dk and t_j = -t_max + j dt this is a
plain DFT sandwiched between alternating signs (m is a multiple of four).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import TypeVar, Union

import numpy as np
import scipy.fft

from services.errors import DomainMismatchError, SymmetryError, WindowError

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-9
SYMMETRY_TOLERANCE = 1e-10
COVERAGE_SIGMAS = 8.0


class Domain(str, Enum):
    FREQUENCY = "frequency"
    TIME = "time"


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform momentum lattice and its conjugate time lattice."""

    m: int
    k_max: float

    def __post_init__(self) -> None:
        if self.m < 8 or self.m & (self.m - 1):
            raise ValueError(f"grid size m={self.m} must be a power of two and at least 8")
        if not self.k_max > 0:
            raise ValueError(f"momentum half-width k_max={self.k_max} must be positive")

    @property
    def dk(self) -> float:
        return 2.0 * self.k_max / self.m

    @property
    def dt(self) -> float:
        return 2.0 * np.pi / (self.m * self.dk)

    @property
    def t_max(self) -> float:
        return np.pi / self.dk

    @cached_property
    def k(self) -> np.ndarray:
        axis = -self.k_max + self.dk * np.arange(self.m)
        axis.setflags(write=False)
        return axis

    @cached_property
    def t(self) -> np.ndarray:
        axis = -self.t_max + self.dt * np.arange(self.m)
        axis.setflags(write=False)
        return axis

    @cached_property
    def alternating(self) -> np.ndarray:
        signs = np.where(np.arange(self.m) % 2 == 0, 1.0, -1.0)
        signs.setflags(write=False)
        return signs

    def axis(self, domain: Domain) -> np.ndarray:
        return self.k if domain is Domain.FREQUENCY else self.t

    def spacing(self, domain: Domain) -> float:
        return self.dk if domain is Domain.FREQUENCY else self.dt

    def half_width(self, domain: Domain) -> float:
        return self.k_max if domain is Domain.FREQUENCY else self.t_max

    def refined(self, factor: int = 2) -> SpectralGrid:
        """Same momentum window, `factor` times more points."""
        return SpectralGrid(self.m * factor, self.k_max)


@dataclass(frozen=True)
class EmitterParams:
    """Decay rate gamma and carrier detuning delta, both in units of gamma."""

    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"decay rate gamma={self.gamma} must be positive")
        if not np.isfinite(self.delta):
            raise ValueError(f"detuning delta={self.delta} must be finite")


def _frozen_complex(values: np.ndarray) -> np.ndarray:
    if isinstance(values, np.ndarray) and values.dtype == np.complex128:
        if not values.flags.writeable:
            return values
    array = np.array(values, dtype=np.complex128)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class OnePhotonState:
    """Mode function phi(k) (or its temporal transform) sampled on the lattice."""

    grid: SpectralGrid
    amps: np.ndarray
    domain: Domain = Domain.FREQUENCY

    def __post_init__(self) -> None:
        amps = _frozen_complex(self.amps)
        if amps.shape != (self.grid.m,):
            raise ValueError(
                f"one-photon amplitudes must have shape ({self.grid.m},), got {amps.shape}"
            )
        object.__setattr__(self, "amps", amps)

    @property
    def spacing(self) -> float:
        return self.grid.spacing(self.domain)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2) * self.spacing))

    def inner(self, other: OnePhotonState) -> complex:
        """<self|other> on the common lattice."""
        _require_compatible(self, other)
        return complex(np.vdot(self.amps, other.amps) * self.spacing)

    def with_amps(self, amps: np.ndarray, domain: Domain | None = None) -> OnePhotonState:
        return replace(self, amps=amps, domain=domain or self.domain)


@dataclass(frozen=True, eq=False)
class TwoPhotonState:
    """Symmetric pair amplitude psi(k, p) on the lattice squared.

    Construction rejects amplitudes whose exchange asymmetry exceeds
    SYMMETRY_TOLERANCE relative to the largest entry and stores the exactly
    symmetrised matrix otherwise.
    """

    grid: SpectralGrid
    amps: np.ndarray
    domain: Domain = Domain.FREQUENCY

    def __post_init__(self) -> None:
        amps = _frozen_complex(self.amps)
        if amps.shape != (self.grid.m, self.grid.m):
            raise ValueError(
                f"two-photon amplitudes must have shape ({self.grid.m}, {self.grid.m}), "
                f"got {amps.shape}"
            )
        asymmetry = float(np.max(np.abs(amps - amps.T)))
        if asymmetry > 0.0:
            scale = float(np.max(np.abs(amps)))
            if asymmetry > SYMMETRY_TOLERANCE * scale:
                raise SymmetryError(
                    f"pair amplitude asymmetry {asymmetry:.3e} exceeds tolerance "
                    f"(scale {scale:.3e})"
                )
            amps = _frozen_complex(0.5 * (amps + amps.T))
        object.__setattr__(self, "amps", amps)

    @property
    def spacing(self) -> float:
        return self.grid.spacing(self.domain)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2) * self.spacing**2))

    def inner(self, other: TwoPhotonState) -> complex:
        _require_compatible(self, other)
        return complex(np.vdot(self.amps, other.amps) * self.spacing**2)

    def with_amps(self, amps: np.ndarray, domain: Domain | None = None) -> TwoPhotonState:
        return replace(self, amps=amps, domain=domain or self.domain)


PhotonState = Union[OnePhotonState, TwoPhotonState]
S = TypeVar("S", OnePhotonState, TwoPhotonState)


def _require_compatible(a: PhotonState, b: PhotonState) -> None:
    if a.grid != b.grid:
        raise DomainMismatchError(f"states live on different grids: {a.grid} vs {b.grid}")
    if a.domain is not b.domain:
        raise DomainMismatchError(
            f"states are in different domains: {a.domain.value} vs {b.domain.value}"
        )


def require_domain(state: PhotonState, domain: Domain) -> None:
    if state.domain is not domain:
        raise DomainMismatchError(
            f"expected a {domain.value}-domain state, got {state.domain.value}"
        )


def require_normalized(state: PhotonState, tolerance: float = NORM_TOLERANCE) -> None:
    norm_sq = state.norm() ** 2
    if abs(norm_sq - 1.0) > tolerance:
        raise ValueError(f"state is not normalized: squared norm {norm_sq:.12f}")


def make_grid(m: int, k_max: float) -> SpectralGrid:
    return SpectralGrid(int(m), float(k_max))


def gaussian_one_photon(grid: SpectralGrid, sigma_k: float, k0: float = 0.0) -> OnePhotonState:
    """Gaussian mode exp(-(k-k0)^2 / 2 sigma_k^2), renormalised on the lattice."""
    if not sigma_k > 0:
        raise ValueError(f"spectral width sigma_k={sigma_k} must be positive")
    room = grid.k_max - abs(k0)
    if COVERAGE_SIGMAS * sigma_k > room:
        raise WindowError(
            f"window k_max={grid.k_max} does not cover {COVERAGE_SIGMAS:g} sigma_k "
            f"(sigma_k={sigma_k}, k0={k0})"
        )
    amps = np.exp(-((grid.k - k0) ** 2) / (2.0 * sigma_k**2))
    amps = amps / np.sqrt(np.sum(amps**2) * grid.dk)
    return OnePhotonState(grid, amps.astype(np.complex128))


def product_two_photon(phi: OnePhotonState) -> TwoPhotonState:
    """psi(k, p) = phi(k) phi(p)."""
    require_normalized(phi)
    return TwoPhotonState(phi.grid, np.outer(phi.amps, phi.amps), phi.domain)


def apply_multiplier(state: S, factors: np.ndarray) -> S:
    """Multiply by `factors` along every photon axis of the state's own domain."""
    if isinstance(state, OnePhotonState):
        return state.with_amps(state.amps * factors)
    return state.with_amps(state.amps * np.outer(factors, factors))


def to_time(state: S) -> S:
    require_domain(state, Domain.FREQUENCY)
    grid = state.grid
    signs = grid.alternating
    scale = np.sqrt(grid.dk / grid.dt)
    if isinstance(state, OnePhotonState):
        out = scale * signs * scipy.fft.fft(signs * state.amps, norm="ortho")
    else:
        plane = np.outer(signs, signs)
        out = scale**2 * plane * scipy.fft.fft2(plane * state.amps, norm="ortho")
    return state.with_amps(out, Domain.TIME)


def to_frequency(state: S) -> S:
    require_domain(state, Domain.TIME)
    grid = state.grid
    signs = grid.alternating
    scale = np.sqrt(grid.dt / grid.dk)
    if isinstance(state, OnePhotonState):
        out = scale * signs * scipy.fft.ifft(signs * state.amps, norm="ortho")
    else:
        plane = np.outer(signs, signs)
        out = scale**2 * plane * scipy.fft.ifft2(plane * state.amps, norm="ortho")
    return state.with_amps(out, Domain.FREQUENCY)


def window_leakage(state: PhotonState, band: float = 0.1) -> float:
    """Fraction of the norm within the outer `band` of the current domain's window.

    For pairs this is the probability that at least one photon sits in the band.
    """
    axis = state.grid.axis(state.domain)
    inside = np.abs(axis) < (1.0 - band) * state.grid.half_width(state.domain)
    weights = np.abs(state.amps) ** 2
    total = float(np.sum(weights))
    if total == 0.0:
        return 0.0
    if isinstance(state, OnePhotonState):
        kept = float(np.sum(weights[inside]))
    else:
        mask = inside.astype(np.float64)
        kept = float(mask @ weights @ mask)
    return max(0.0, 1.0 - kept / total)
