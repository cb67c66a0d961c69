"""Posterior serialisation, experiment configuration and reports."""

from .serialize import load_posterior, posterior_from_dict, posterior_to_dict, save_posterior

__all__ = ["load_posterior", "posterior_from_dict", "posterior_to_dict", "save_posterior"]
