"""Kapitza-Dirac electron diffraction with wall-induced decoherence and
dissipation."""

__version__ = "0.1.0"
