"""Adaptive importance sampling with automatic tempering."""

__version__ = "1.0.0"
