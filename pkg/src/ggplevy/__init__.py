"""
ggp-levy - Generalized gamma process subordinators and stochastic volatility

Simulation and pseudo-marginal inference for volatility models driven by
generalized gamma processes:
- Exact increment samplers for the GGP and its normal variance mixture
- GBFRY jump-size distribution and tail asymptotics
- Exp-Levy and Ornstein-Uhlenbeck stochastic volatility models
- Particle marginal Metropolis-Hastings with adaptive proposals
- Predictive and latent-volatility evaluation metrics

Example usage:
    import numpy as np
    from ggplevy import RngStream, SvModelSpec, simulate_returns

    rng = RngStream(seed=0)
    spec = SvModelSpec.build("exp_levy", {"eta": 1.0, "sigma": 0.6, "tau": 3.0, "c": 1.0})
    series, vbar = simulate_returns(rng, spec, np.ones(500))
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    DomainError,
    GgpLevyError,
    InvariantError,
)
from .core.rng import RngStream
from .core.ggp import (
    GbfryParams,
    GgpParams,
    cumulant,
    laplace_exponent,
    levy_intensity,
    sample_gbfry,
    sample_ggp_increment,
    sample_nggp_increment,
)
from .models.sv import ReturnSeries, SvKind, SvModelSpec, simulate_ou_path, simulate_returns
from .inference.priors import PriorSpec
from .inference.estimators import estimate_loglik_exp_levy, estimate_loglik_ou_smc
from .inference.pmmh import McmcConfig, PosteriorTrace, posterior_predictive, run_pmmh, summarize_traces
from .exec.pool import run_chains
from .config import RunConfig, get_config, load_config, set_config

__version__ = "0.1.0"

__all__ = [
    # Errors
    "GgpLevyError",
    "DomainError",
    "ConvergenceError",
    "ConfigError",
    "DataError",
    "InvariantError",

    # Random streams and processes
    "RngStream",
    "GgpParams",
    "GbfryParams",
    "cumulant",
    "laplace_exponent",
    "levy_intensity",
    "sample_ggp_increment",
    "sample_nggp_increment",
    "sample_gbfry",

    # Models
    "SvKind",
    "SvModelSpec",
    "ReturnSeries",
    "simulate_returns",
    "simulate_ou_path",

    # Inference
    "PriorSpec",
    "McmcConfig",
    "PosteriorTrace",
    "estimate_loglik_exp_levy",
    "estimate_loglik_ou_smc",
    "run_pmmh",
    "run_chains",
    "posterior_predictive",
    "summarize_traces",

    # Configuration
    "RunConfig",
    "load_config",
    "get_config",
    "set_config",
]
