import numpy as np
import pytest

from services.errors import DomainMismatchError, WindowError
from services.pulse_domain import (
    Domain,
    OnePhotonState,
    gaussian_one_photon,
    make_grid,
    product_two_photon,
    to_frequency,
    to_time,
)
from services.temporal_trap import (
    TrapParams,
    apply_quadratic_spectral_phase,
    apply_quadratic_temporal_phase,
    apply_trap,
    check_time_window,
    trap_from_rotation,
)


def _rms_width(values, axis, spacing):
    weights = np.abs(values) ** 2 * spacing
    mean = np.sum(weights * axis)
    return np.sqrt(np.sum(weights * (axis - mean) ** 2))


def test_trap_from_rotation_reference_values():
    trap = trap_from_rotation(np.pi / 2, 1.0)
    assert trap.lambda1 == pytest.approx(0.5)
    assert trap.lambda2 == pytest.approx(0.5)
    assert trap.lambda3 == trap.lambda1
    assert trap.omega_dt == pytest.approx(np.pi / 2)
    idle = trap_from_rotation(0.0, 2.0)
    assert (idle.lambda1, idle.lambda2, idle.lambda3) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("omega_dt, sigma_t", [(0.3, 1.0), (1.0, 0.7), (-2.5, 1.8), (3.0, 1.2)])
def test_trap_coefficient_identities(omega_dt, sigma_t):
    trap = trap_from_rotation(omega_dt, sigma_t)
    assert 1 - 4 * trap.lambda2 * trap.lambda3 == pytest.approx(np.cos(omega_dt), abs=1e-12)
    assert 2 * trap.lambda2 == pytest.approx(np.sin(omega_dt) / sigma_t**2, abs=1e-12)


@pytest.mark.parametrize("omega_dt, sigma_t", [(np.pi, 1.0), (-4.0, 1.0), (1.0, 0.0)])
def test_trap_from_rotation_rejects_singular_inputs(omega_dt, sigma_t):
    with pytest.raises(ValueError):
        trap_from_rotation(omega_dt, sigma_t)


def test_symmetric_trap_and_chirp_folding():
    trap = TrapParams.symmetric(0.25, 0.4)
    assert trap.lambda3 == 0.25
    folded = trap.with_absorbed_chirp(0.1)
    assert folded.lambda1 == pytest.approx(0.35)
    assert folded.lambda3 == 0.25


def test_zero_coefficients_are_identities():
    grid = make_grid(128, 8.0)
    phi = gaussian_one_photon(grid, 0.8)
    assert apply_quadratic_spectral_phase(phi, 0.0) is phi
    temporal = to_time(phi)
    assert apply_quadratic_temporal_phase(temporal, 0.0) is temporal


def test_quadratic_phases_preserve_norm_and_compose():
    grid = make_grid(128, 8.0)
    phi = gaussian_one_photon(grid, 0.8)
    once = apply_quadratic_spectral_phase(apply_quadratic_spectral_phase(phi, 0.3), -0.7)
    combined = apply_quadratic_spectral_phase(phi, -0.4)
    np.testing.assert_allclose(once.amps, combined.amps, atol=1e-12)
    assert once.norm() == pytest.approx(1.0, abs=1e-12)
    pair = apply_quadratic_spectral_phase(product_two_photon(phi), 0.3)
    assert pair.norm() == pytest.approx(1.0, abs=1e-12)
    chirped = apply_quadratic_temporal_phase(to_time(phi), 0.2)
    assert chirped.norm() == pytest.approx(1.0, abs=1e-12)


def test_spectral_chirp_broadens_temporal_width():
    grid = make_grid(1024, 16.0)
    phi = gaussian_one_photon(grid, 1.0)
    before = _rms_width(to_time(phi).amps, grid.t, grid.dt)
    after = _rms_width(to_time(apply_quadratic_spectral_phase(phi, 1.0)).amps, grid.t, grid.dt)
    assert after / before == pytest.approx(np.sqrt(5.0), rel=1e-6)


def test_temporal_chirp_broadens_spectral_width():
    grid = make_grid(1024, 16.0)
    phi = gaussian_one_photon(grid, 1.0)
    temporal = to_time(phi)
    chirped = apply_quadratic_temporal_phase(temporal, 1.0)
    assert _rms_width(chirped.amps, grid.t, grid.dt) == pytest.approx(
        _rms_width(temporal.amps, grid.t, grid.dt)
    )
    spectral_before = _rms_width(phi.amps, grid.k, grid.dk)
    spectral_after = _rms_width(to_frequency(chirped).amps, grid.k, grid.dk)
    assert spectral_after / spectral_before == pytest.approx(np.sqrt(5.0), rel=1e-6)


def test_domain_preconditions():
    grid = make_grid(64, 8.0)
    phi = gaussian_one_photon(grid, 0.5)
    with pytest.raises(DomainMismatchError):
        apply_quadratic_temporal_phase(phi, 0.1)
    with pytest.raises(DomainMismatchError):
        apply_quadratic_spectral_phase(to_time(phi), 0.1)
    with pytest.raises(DomainMismatchError):
        apply_trap(to_time(phi), TrapParams.symmetric(0.1, 0.1))


def test_matched_gaussian_is_a_fixed_point():
    grid = make_grid(1024, 16.0)
    sigma_k = 1.25
    phi = gaussian_one_photon(grid, sigma_k)
    out = apply_trap(phi, trap_from_rotation(1.0, 1.0 / sigma_k))
    assert out.domain is Domain.FREQUENCY
    assert abs(out.inner(phi)) >= 1 - 1e-6


def test_mismatched_gaussian_is_not_invariant():
    grid = make_grid(1024, 16.0)
    phi = gaussian_one_photon(grid, 2.0)
    out = apply_trap(phi, trap_from_rotation(1.0, 1.0))
    assert abs(out.inner(phi)) < 1 - 1e-3


def test_four_quarter_turns_return_any_state():
    grid = make_grid(1024, 16.0)
    rng = np.random.default_rng(7)
    # smooth random superposition of displaced Gaussians
    amps = np.zeros(grid.m, dtype=np.complex128)
    weights = rng.normal(size=3) + 1j * rng.normal(size=3)
    for centre, weight in zip(rng.uniform(-1.0, 1.0, 3), weights):
        amps += weight * np.exp(-((grid.k - centre) ** 2) / 2.0)
    amps /= np.sqrt(np.sum(np.abs(amps) ** 2) * grid.dk)
    phi = OnePhotonState(grid, amps)
    trap = trap_from_rotation(np.pi / 2, 1.0)
    out = phi
    for _ in range(4):
        out = apply_trap(out, trap)
    assert abs(out.inner(phi)) >= 1 - 1e-5


def test_trap_rotates_displaced_gaussian_in_phase_space():
    grid = make_grid(1024, 16.0)
    theta = 0.8
    phi = gaussian_one_photon(grid, 1.0, k0=1.5)
    out = apply_trap(phi, trap_from_rotation(theta, 1.0))
    weights_k = np.abs(out.amps) ** 2 * grid.dk
    temporal = to_time(out)
    weights_t = np.abs(temporal.amps) ** 2 * grid.dt
    mean_k = np.sum(weights_k * grid.k)
    mean_t = np.sum(weights_t * grid.t)
    # starting centroid (t, k) = (0, 1.5)
    assert mean_k == pytest.approx(1.5 * np.cos(theta), rel=1e-3)
    assert abs(mean_t) == pytest.approx(1.5 * np.sin(theta), rel=1e-3)


def test_time_window_guard():
    grid = make_grid(64, 8.0)
    flat = OnePhotonState(grid, np.ones(64) / np.sqrt(64 * grid.dt), Domain.TIME)
    with pytest.raises(WindowError):
        apply_quadratic_temporal_phase(flat, 0.1)
    compact = to_time(gaussian_one_photon(grid, 1.0))
    assert check_time_window(compact) < 1e-8
