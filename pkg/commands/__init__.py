"""Command modules for the photon-gate CLI."""
