"""Zeros of pinning-model partition functions."""

__version__ = "0.1.0"
