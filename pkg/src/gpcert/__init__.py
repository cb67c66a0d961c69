"""Certified bounds on Gaussian process classifier probabilities over input boxes."""

__version__ = "0.1.0"
