"""Plane and line priors for unsupervised indoor depth estimation."""

__version__ = "0.1.0"
