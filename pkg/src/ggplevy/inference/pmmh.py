"""
Pseudo-marginal Metropolis-Hastings.

One chain per call: a Gaussian random walk in transformed space, an
unbiased likelihood estimate for every proposal, and the stored estimate
of the current state reused (never recomputed) until a proposal is
accepted. During burn-in each coordinate's step follows the running
standard deviation of the chain, under a common scale tuned towards the
target acceptance rate; both are frozen afterwards.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..core.rng import RngStream, sample_normal, sample_uniform
from ..errors import LOG_ZERO, ConfigError, ConvergenceError, DimensionError, DomainError, GgpLevyError
from ..models.sv import ReturnSeries, SvModelSpec, simulate_returns
from .estimators import LikelihoodEstimate, LoglikEstimator, default_estimator
from .priors import PriorSpec, inverse_transform_params, log_prior_transformed, transform_params

logger = logging.getLogger(__name__)

TARGET_ACCEPTANCE = 0.25
ACCEPTANCE_WARN_RANGE = (0.05, 0.6)
# Robbins-Monro gain exponent
ADAPT_DECAY = 0.6
# pseudo-observations of the configured step in the per-coordinate variance
ADAPT_PRIOR_WEIGHT = 10.0
INITIAL_ESTIMATE_ATTEMPTS = 100

DEFAULT_INIT = {"eta": 1.0, "sigma": 0.5, "tau": 3.0, "c": 1.0, "lam": 0.05}
DEFAULT_STEP = 0.1


@dataclass(frozen=True)
class McmcConfig:
    """Settings for one PMMH chain (n_chains is read by the chain pool)"""
    n_iters: int = 4000
    n_burnin: int = 1000
    n_particles: int = 1000
    n_chains: int = 1
    proposal_step: Union[float, Mapping[str, float]] = DEFAULT_STEP
    seed: int = 0
    adapt: bool = True
    latent_thin: int = 10
    init: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        checks = {
            "n_iters": self.n_iters >= 1,
            "n_burnin": 0 <= self.n_burnin < self.n_iters,
            "n_particles": self.n_particles >= 1,
            "n_chains": self.n_chains >= 1,
            "latent_thin": self.latent_thin >= 0,
            "seed": 0 <= self.seed < 2**64,
        }
        for name, ok in checks.items():
            if not ok:
                raise ConfigError(f"invalid value {getattr(self, name)!r}", field=f"mcmc.{name}")
        steps = self.proposal_step.values() if isinstance(self.proposal_step, Mapping) else [self.proposal_step]
        if any(not (s > 0.0 and math.isfinite(s)) for s in steps):
            raise ConfigError("steps must be positive", field="mcmc.proposal_step")

    def step_vector(self, names: Sequence[str]) -> np.ndarray:
        if isinstance(self.proposal_step, Mapping):
            return np.array([float(self.proposal_step.get(n, DEFAULT_STEP)) for n in names])
        return np.full(len(names), float(self.proposal_step))


@dataclass
class PosteriorTrace:
    """Retained (post burn-in) draws of one chain"""
    names: tuple
    natural: np.ndarray
    transformed: np.ndarray
    loglik_hat: np.ndarray
    accepted: np.ndarray
    chain: int = 0
    latent_iterations: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    latent_vbar_draws: Optional[np.ndarray] = None
    step_scale: float = 1.0
    proposal_sd: np.ndarray = field(default_factory=lambda: np.empty(0))
    elapsed_s: float = 0.0

    def __len__(self) -> int:
        return int(self.natural.shape[0])

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted)) if self.accepted.size else 0.0

    def column(self, name: str) -> np.ndarray:
        return self.natural[:, self.names.index(name)]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"iteration": np.arange(len(self))})
        for i, name in enumerate(self.names):
            frame[name] = self.natural[:, i]
        for i, name in enumerate(self.names):
            frame[f"t_{name}"] = self.transformed[:, i]
        frame["loglik_hat"] = self.loglik_hat
        frame["accepted"] = self.accepted.astype(int)
        return frame


def log_acceptance_ratio(prior: PriorSpec, names: Sequence[str], z_current: np.ndarray,
                         z_proposed: np.ndarray, loglik_current: float, loglik_proposed: float) -> float:
    """
    log of the MH ratio for a symmetric random walk in transformed space.

    The recycled loglik_current must be the estimate stored with the
    current state.
    """
    lp_prop = log_prior_transformed(prior, z_proposed, names)
    if lp_prop == LOG_ZERO or loglik_proposed == LOG_ZERO:
        return LOG_ZERO
    lp_cur = log_prior_transformed(prior, z_current, names)
    return (lp_prop + loglik_proposed) - (lp_cur + loglik_current)


def _initial_state(rng, template, prior, data, cfg, estimator, names, want_path):
    support = prior.sigma_support
    init = {**DEFAULT_INIT, **template.free_params(), **(cfg.init or {})}
    try:
        z = transform_params(init, names, support)
    except DomainError as e:
        raise ConfigError(str(e), field="mcmc.init") from e
    if log_prior_transformed(prior, z, names) == LOG_ZERO:
        raise ConfigError(f"initial values {init} lie outside the prior support", field="mcmc.init")
    model = template.with_params(inverse_transform_params(z, names, support))
    for attempt in range(INITIAL_ESTIMATE_ATTEMPTS):
        est = estimator(rng, model, data, cfg.n_particles, want_path)
        if est.loglik != LOG_ZERO and math.isfinite(est.loglik):
            return z, est
        logger.warning(f"Non-finite initial likelihood estimate (attempt {attempt + 1})")
    raise ConvergenceError(f"no finite likelihood estimate at the initial point after "
                           f"{INITIAL_ESTIMATE_ATTEMPTS} attempts")


def run_pmmh(rng: RngStream, template: SvModelSpec, prior: PriorSpec, data: ReturnSeries,
             cfg: McmcConfig, estimator: Optional[LoglikEstimator] = None, chain: int = 0) -> PosteriorTrace:
    """
    Run one PMMH chain of cfg.n_iters iterations and keep the last
    n_iters - n_burnin.

    template fixes the model kind and drift terms; its free parameters
    are the starting point unless cfg.init overrides them. estimator
    defaults to the one matching the model family. With cfg.adapt the
    per-coordinate steps start from cfg.proposal_step and are retuned
    during burn-in; trace.proposal_sd holds the ones used afterwards.
    """
    estimator = estimator or default_estimator(template)
    names = template.kind.parameter_names
    support = prior.sigma_support
    d = len(names)
    step = cfg.step_vector(names)
    keep_latent = cfg.latent_thin > 0
    started = time.perf_counter()

    z, est = _initial_state(rng, template, prior, data, cfg, estimator, names, keep_latent)
    loglik = est.loglik
    latent = est.latent_vbar

    n_keep = cfg.n_iters - cfg.n_burnin
    draws_t = np.empty((n_keep, d))
    draws_n = np.empty((n_keep, d))
    logliks = np.empty(n_keep)
    accepted = np.zeros(n_keep, dtype=bool)
    latent_rows: List[np.ndarray] = []
    latent_iters: List[int] = []
    log_scale = 0.0
    sd = step.copy()
    running_mean = z.copy()
    running_m2 = np.zeros(d)
    n_seen = 0

    logger.info(f"Chain {chain}: {cfg.n_iters} iterations, {cfg.n_particles} particles, "
                f"model {template.kind.value}")

    for i in range(cfg.n_iters):
        z_prop = z + math.exp(log_scale) * sd * np.asarray(sample_normal(rng, d))
        # drawn every iteration so the stream advances identically
        log_u = math.log(sample_uniform(rng))

        log_alpha = LOG_ZERO
        prop_est = None
        if log_prior_transformed(prior, z_prop, names) != LOG_ZERO:
            model = template.with_params(inverse_transform_params(z_prop, names, support))
            try:
                prop_est = estimator(rng, model, data, cfg.n_particles, keep_latent)
            except GgpLevyError as e:
                logger.debug(f"Iteration {i}: estimator failed, proposal rejected: {e}")
                prop_est = LikelihoodEstimate(loglik=LOG_ZERO)
            log_alpha = log_acceptance_ratio(prior, names, z, z_prop, loglik, prop_est.loglik)

        accept = log_u < log_alpha
        if accept:
            z, loglik, latent = z_prop, prop_est.loglik, prop_est.latent_vbar

        if i < cfg.n_burnin:
            if cfg.adapt:
                gain = (i + 1.0) ** (-ADAPT_DECAY)
                log_scale += gain * (math.exp(min(0.0, log_alpha)) - TARGET_ACCEPTANCE)
                # Welford update, shrunk towards the configured step
                n_seen += 1
                diff = z - running_mean
                running_mean = running_mean + diff / n_seen
                running_m2 = running_m2 + diff * (z - running_mean)
                sd = np.sqrt((ADAPT_PRIOR_WEIGHT * step**2 + running_m2) / (ADAPT_PRIOR_WEIGHT + n_seen))
            continue

        r = i - cfg.n_burnin
        draws_t[r] = z
        draws_n[r] = [v for v in inverse_transform_params(z, names, support).values()]
        logliks[r] = loglik
        accepted[r] = accept
        if keep_latent and latent is not None and r % cfg.latent_thin == 0:
            latent_rows.append(np.array(latent, copy=True))
            latent_iters.append(r)

    trace = PosteriorTrace(
        names=tuple(names),
        natural=draws_n,
        transformed=draws_t,
        loglik_hat=logliks,
        accepted=accepted,
        chain=chain,
        latent_iterations=np.asarray(latent_iters, dtype=np.int64),
        latent_vbar_draws=np.vstack(latent_rows) if latent_rows else None,
        step_scale=math.exp(log_scale),
        proposal_sd=math.exp(log_scale) * sd,
        elapsed_s=time.perf_counter() - started,
    )
    logger.debug(f"Chain {chain}: adapted step scale {trace.step_scale:.4g}, "
                 f"proposal sd {dict(zip(names, np.round(trace.proposal_sd, 4)))}")
    rate = trace.acceptance_rate
    logger.info(f"Chain {chain} finished: acceptance rate {rate:.3f} in {trace.elapsed_s:.1f}s")
    low, high = ACCEPTANCE_WARN_RANGE
    if not low < rate < high:
        logger.warning(f"Chain {chain}: acceptance rate {rate:.3f} outside ({low}, {high})")
    return trace


def posterior_predictive(rng: RngStream, template: SvModelSpec, traces: Sequence[PosteriorTrace],
                         delta: Sequence[float]):
    """
    One simulated return series (and its Vbar path) per retained posterior
    draw, pooled over chains in chain order.

    Returns (returns, vbar) matrices of shape (draws, len(delta)).
    """
    delta = np.asarray(delta, dtype=float)
    rows_y, rows_v = [], []
    for trace in traces:
        for row in trace.natural:
            model = template.with_params(dict(zip(trace.names, row)))
            series, vbar = simulate_returns(rng, model, delta)
            rows_y.append(series.y)
            rows_v.append(vbar)
    if not rows_y:
        raise DimensionError("no posterior draws to simulate from")
    return np.vstack(rows_y), np.vstack(rows_v)


def summarize_traces(traces: Sequence[PosteriorTrace]) -> pd.DataFrame:
    """Pooled posterior mean and 2.5% / 97.5% lower quantiles per parameter"""
    if not traces:
        raise DimensionError("no traces to summarise")
    names = traces[0].names
    pooled = np.vstack([t.natural for t in traces])
    rows: List[Dict[str, float]] = []
    for i, name in enumerate(names):
        col = pooled[:, i]
        rows.append({
            "parameter": name,
            "mean": float(np.mean(col)),
            "q025": float(np.quantile(col, 0.025, method="inverted_cdf")),
            "q975": float(np.quantile(col, 0.975, method="inverted_cdf")),
        })
    for t in traces:
        rows.append({"parameter": f"acceptance_chain{t.chain}", "mean": t.acceptance_rate,
                     "q025": float("nan"), "q975": float("nan")})
    return pd.DataFrame(rows, columns=["parameter", "mean", "q025", "q975"])


__all__ = [
    "McmcConfig",
    "PosteriorTrace",
    "LikelihoodEstimate",
    "log_acceptance_ratio",
    "run_pmmh",
    "posterior_predictive",
    "summarize_traces",
]
