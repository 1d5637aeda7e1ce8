"""Simulation services: pulse lattices, scattering, trap, cascade, oracle and optimizer."""
