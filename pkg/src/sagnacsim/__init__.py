"""Simulation and analysis of hybrid Sagnac-waveguide entangled photon-pair sources."""

__version__ = "0.1.0"
