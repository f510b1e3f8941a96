"""Fourier-sparsity membership testers for structured discrete distributions."""

__version__ = "0.1.0"
