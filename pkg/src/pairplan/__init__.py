"""Pair planning and wavelet-regularized image losses for sparse-view reconstruction."""

__version__ = "0.1.0"
