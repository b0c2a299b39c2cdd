"""Reverse relative entropy of entanglement and composite hypothesis testing."""

__version__ = "0.1.0"
