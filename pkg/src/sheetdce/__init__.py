"""Dynamical-Casimir photon creation in a cavity cut by a laser-pulsed plasma sheet."""

__version__ = "0.1.0"
