"""Generative-environment dynamic mean-variance portfolio selection."""

__version__ = "0.1.0"
