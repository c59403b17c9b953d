"""Pseudo-marginal inference: priors, likelihood estimators and the PMMH sampler"""

__all__ = []
