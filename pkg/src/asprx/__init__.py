"""Simulation of an analog self-coherent (homodyne) QPSK receiver with an optical Costas loop."""

__version__ = "0.1.0"
