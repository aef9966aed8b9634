"""Simulation laboratory for quantum teleportation protocols."""

__version__ = "0.1.0"
