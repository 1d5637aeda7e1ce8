"""Exception types raised by the simulation services."""

from __future__ import annotations


class PhotonGateError(Exception):
    """Base class for simulator failures the CLI reports with exit code 1."""


class DomainMismatchError(PhotonGateError, ValueError):
    """A state is in the wrong domain, or two states live on different grids."""


class SymmetryError(PhotonGateError, ValueError):
    """A two-photon amplitude violates bosonic exchange symmetry."""


class WindowError(PhotonGateError, ValueError):
    """A pulse does not fit its lattice window (aliasing risk)."""


class CalibrationError(PhotonGateError, RuntimeError):
    """The correlated-scattering constant is missing or failed to calibrate."""


class IntegrationError(PhotonGateError, RuntimeError):
    """The master-equation integrator produced an unusable result."""
