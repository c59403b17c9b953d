"""
Unbiased likelihood estimators for the stochastic-volatility models.

Both return log p-hat where p-hat is a non-negative unbiased estimate of
the marginal likelihood, which is what pseudo-marginal MCMC needs. A
zero estimate is reported as LOG_ZERO, never raised.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from ..core.rng import RngStream
from ..errors import LOG_ZERO, DomainError
from ..models.sv import (
    OuState,
    ReturnSeries,
    SvModelSpec,
    observation_logdensity,
    propagate_ou,
    sample_exp_levy_volatilities,
    sample_ou_stationary,
)

logger = logging.getLogger(__name__)

# particles x observations simulated at once by the exponential-Levy estimator
_BLOCK_ELEMENTS = 1 << 20


@dataclass
class LikelihoodEstimate:
    """log p-hat with an optional latent Vbar path drawn from the particle system"""
    loglik: float
    latent_vbar: Optional[np.ndarray] = None


@dataclass
class SmcResult:
    """
    Output of the bootstrap particle filter.

    filtered_vbar[k] holds equally weighted particles for Vbar_k given
    y_1..y_k (the particles kept by resampling after step k).
    """
    loglik: float
    filtered_vbar: np.ndarray
    latent_vbar: Optional[np.ndarray] = None


# (rng, spec, data, n_particles, want_path) -> LikelihoodEstimate
LoglikEstimator = Callable[[RngStream, SvModelSpec, ReturnSeries, int, bool], LikelihoodEstimate]


def _check_particles(n_particles: int, minimum: int):
    if int(n_particles) != n_particles or n_particles < minimum:
        raise DomainError(f"n_particles must be an integer >= {minimum}, got {n_particles}")


def systematic_resample(rng: RngStream, weights: np.ndarray, n: Optional[int] = None) -> np.ndarray:
    """
    Systematic resampling: one uniform, n evenly spaced points through the
    cumulative weights. Zero-weight particles are never selected.
    """
    w = np.asarray(weights, dtype=float)
    n = w.size if n is None else int(n)
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    u = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, w.size - 1)


def _pick_columns(rng: RngStream, logw: np.ndarray) -> np.ndarray:
    """One row index per column, drawn proportionally to exp(logw)"""
    w = np.exp(logw - logw.max(axis=0))
    cdf = np.cumsum(w, axis=0)
    cdf /= cdf[-1]
    u = rng.random(logw.shape[1])
    return np.minimum((cdf <= u).sum(axis=0), logw.shape[0] - 1)


def estimate_loglik_exp_levy(rng: RngStream, spec: SvModelSpec, data: ReturnSeries,
                             n_particles: int, return_path: bool = False) -> LikelihoodEstimate:
    """
    Monte Carlo estimate of the exponential-Levy likelihood.

    p-hat = prod_k (1/n_p) sum_j p(y_k | vbar_k^(j)) with fresh independent
    volatility draws for every k; the inner means use log-sum-exp.
    """
    _check_particles(n_particles, 1)
    n = len(data)
    block = max(1, _BLOCK_ELEMENTS // n_particles)
    log_np = math.log(n_particles)
    path = np.empty(n) if return_path else None
    total = 0.0

    for start in range(0, n, block):
        stop = min(start + block, n)
        delta = data.delta[start:stop]
        vbar = sample_exp_levy_volatilities(rng, spec, delta, n_paths=n_particles)
        logw = observation_logdensity(spec, data.y[start:stop], delta, vbar)
        with np.errstate(divide="ignore"):
            per_obs = logsumexp(logw, axis=0) - log_np
        if np.any(per_obs == LOG_ZERO):
            k = start + int(np.argmax(per_obs == LOG_ZERO))
            logger.debug(f"Every particle has zero density at observation {k}")
            return LikelihoodEstimate(loglik=LOG_ZERO)
        total += float(np.sum(per_obs))
        if return_path:
            rows = _pick_columns(rng, logw)
            path[start:stop] = vbar[rows, np.arange(stop - start)]

    return LikelihoodEstimate(loglik=total, latent_vbar=path)


def estimate_loglik_ou_smc(rng: RngStream, spec: SvModelSpec, data: ReturnSeries,
                           n_particles: int, return_path: bool = False) -> SmcResult:
    """
    Bootstrap particle filter for the OU models.

    Particles start from the stationary law with Z_0 = 0, are propagated
    by the exact OU noise, weighted by the observation density and
    resampled systematically after every step. The log-likelihood is
    sum_k log(mean weight_k). If every particle has zero weight the filter
    stops and reports LOG_ZERO.
    """
    _check_particles(n_particles, 2)
    n = len(data)
    filtered = np.empty((n, n_particles))
    if n == 0:
        return SmcResult(loglik=0.0, filtered_vbar=filtered, latent_vbar=np.empty(0) if return_path else None)

    state = OuState(
        v=np.asarray(sample_ou_stationary(rng, spec, size=n_particles), dtype=float),
        z=np.zeros(n_particles),
        vbar=np.zeros(n_particles),
    )
    vbar_history = np.empty((n, n_particles)) if return_path else None
    ancestors = np.empty((n, n_particles), dtype=np.int64) if return_path else None
    loglik = 0.0

    for k in range(n):
        state = propagate_ou(rng, spec, state, float(data.delta[k]))
        logw = observation_logdensity(spec, data.y[k], data.delta[k], state.vbar)
        top = float(np.max(logw))
        if top == LOG_ZERO:
            logger.debug(f"Particle system collapsed at observation {k}")
            return SmcResult(loglik=LOG_ZERO, filtered_vbar=filtered[:k])
        w = np.exp(logw - top)
        loglik += top + math.log(np.mean(w))

        idx = systematic_resample(rng, w)
        filtered[k] = state.vbar[idx]
        if return_path:
            vbar_history[k] = state.vbar
            ancestors[k] = idx
        state = OuState(v=state.v[idx], z=state.z[idx], vbar=state.vbar[idx])

    path = None
    if return_path:
        # trace one surviving particle back through its ancestors
        j = int(rng.random() * n_particles)
        path = np.empty(n)
        for k in range(n - 1, -1, -1):
            j = int(ancestors[k][j])
            path[k] = vbar_history[k][j]

    return SmcResult(loglik=loglik, filtered_vbar=filtered, latent_vbar=path)


def default_estimator(spec: SvModelSpec) -> LoglikEstimator:
    """The likelihood estimator matching the model family"""
    if spec.kind.is_ou:
        def ou_estimator(rng, model, data, n_particles, want_path):
            result = estimate_loglik_ou_smc(rng, model, data, n_particles, return_path=want_path)
            return LikelihoodEstimate(loglik=result.loglik, latent_vbar=result.latent_vbar)
        return ou_estimator

    def exp_levy_estimator(rng, model, data, n_particles, want_path):
        return estimate_loglik_exp_levy(rng, model, data, n_particles, return_path=want_path)
    return exp_levy_estimator
