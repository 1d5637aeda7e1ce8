"""Harmonic temporal trap built from quadratic phases.

A trap round is spectral phase exp(-i l1 k^2), temporal phase exp(-i l2 t^2),
spectral phase exp(-i l3 k^2). With l1 = l3 = sigma_t^2 tan(theta/2) / 2 and
l2 = sin(theta) / (2 sigma_t^2) the sandwich rotates phase space
(t / sigma_t, k sigma_t) by theta, so a Gaussian with sigma_t = 1 / sigma_k
is its fixed point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from services.errors import WindowError
from services.pulse_domain import (
    Domain,
    OnePhotonState,
    PhotonState,
    S,
    apply_multiplier,
    require_domain,
    to_frequency,
    to_time,
    window_leakage,
)

logger = logging.getLogger(__name__)

GUARD_BAND = 0.1
ONE_PHOTON_LEAK_LIMIT = 1e-8
TWO_PHOTON_LEAK_LIMIT = 1e-4


@dataclass(frozen=True)
class TrapParams:
    lambda1: float
    lambda2: float
    lambda3: float
    omega_dt: float | None = None
    sigma_t: float | None = None

    @classmethod
    def symmetric(cls, lambda1: float, lambda2: float) -> TrapParams:
        """Two-knob trap with lambda3 = lambda1."""
        return cls(float(lambda1), float(lambda2), float(lambda1))

    def with_absorbed_chirp(self, extra: float) -> TrapParams:
        """Fold an extra quadratic spectral phase into the first element."""
        return replace(self, lambda1=self.lambda1 + extra)


def trap_from_rotation(omega_dt: float, sigma_t: float) -> TrapParams:
    if not abs(omega_dt) < np.pi:
        raise ValueError(f"rotation angle omega_dt={omega_dt} must lie strictly inside (-pi, pi)")
    if not sigma_t > 0:
        raise ValueError(f"temporal width sigma_t={sigma_t} must be positive")
    outer = sigma_t**2 * np.tan(omega_dt / 2.0) / 2.0
    middle = np.sin(omega_dt) / (2.0 * sigma_t**2)
    return TrapParams(float(outer), float(middle), float(outer), float(omega_dt), float(sigma_t))


def apply_quadratic_spectral_phase(state: S, lam: float) -> S:
    require_domain(state, Domain.FREQUENCY)
    if lam == 0:
        return state
    return apply_multiplier(state, np.exp(-1j * lam * state.grid.k**2))


def check_time_window(state: PhotonState) -> float:
    """Raise WindowError when too much norm sits near the periodic seam of the time window."""
    leak = window_leakage(state, GUARD_BAND)
    limit = ONE_PHOTON_LEAK_LIMIT if isinstance(state, OnePhotonState) else TWO_PHOTON_LEAK_LIMIT
    if leak > limit:
        raise WindowError(
            f"{leak:.3e} of the norm lies in the outer {GUARD_BAND:.0%} of the time window "
            f"(limit {limit:g}); raise grid.m or lower grid.k_max to widen it"
        )
    return leak


def apply_quadratic_temporal_phase(state: S, lambda2: float) -> S:
    require_domain(state, Domain.TIME)
    if lambda2 == 0:
        return state
    check_time_window(state)
    return apply_multiplier(state, np.exp(-1j * lambda2 * state.grid.t**2))


def apply_trap(state: S, trap: TrapParams) -> S:
    require_domain(state, Domain.FREQUENCY)
    state = apply_quadratic_spectral_phase(state, trap.lambda1)
    state = to_frequency(apply_quadratic_temporal_phase(to_time(state), trap.lambda2))
    return apply_quadratic_spectral_phase(state, trap.lambda3)
