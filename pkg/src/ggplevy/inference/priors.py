"""
Priors and the unconstrained parameterisation used by the samplers.

Priors are densities in natural space. Proposals move in transformed
space (log eta, logit sigma, log(tau - 1), log c, log lam), so the target
there adds the log-Jacobian |d natural / d transformed|.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Sequence, Union

import numpy as np
from scipy import special, stats

from ..errors import LOG_ZERO, DomainError

SIGMA_UNIT = "unit"
SIGMA_BELOW_ONE = "below_one"


@dataclass(frozen=True)
class GammaPrior:
    """Gamma(shape, rate) density on (0, inf)"""
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0.0 and self.rate > 0.0):
            raise DomainError(f"gamma prior needs positive hyperparameters, got {self.shape}, {self.rate}")

    def logpdf(self, x: float) -> float:
        if not x > 0.0 or not math.isfinite(x):
            return LOG_ZERO
        return float(stats.gamma.logpdf(x, a=self.shape, scale=1.0 / self.rate))

    def cdf(self, x):
        return stats.gamma.cdf(x, a=self.shape, scale=1.0 / self.rate)


@dataclass(frozen=True)
class UniformPrior:
    """Uniform density on the open interval (low, high)"""
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.low < self.high:
            raise DomainError(f"uniform prior needs low < high, got {self.low}, {self.high}")

    def logpdf(self, x: float) -> float:
        if not self.low < x < self.high:
            return LOG_ZERO
        return -math.log(self.high - self.low)

    def cdf(self, x):
        return stats.uniform.cdf(x, loc=self.low, scale=self.high - self.low)


@dataclass(frozen=True)
class NormalPrior:
    """Normal(loc, scale) density on log(1 - sigma), so sigma ranges over (-inf, 1)"""
    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0.0:
            raise DomainError(f"normal prior needs a positive scale, got {self.scale}")

    def logpdf(self, x: float) -> float:
        if not x < 1.0:
            return LOG_ZERO
        s = math.log1p(-x)
        # change of variables from s = log(1 - sigma) back to sigma
        return float(stats.norm.logpdf(s, loc=self.loc, scale=self.scale)) - s

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.log1p(-np.minimum(x, 1.0))
        return stats.norm.sf(s, loc=self.loc, scale=self.scale)


SigmaPrior = Union[UniformPrior, NormalPrior]


@dataclass(frozen=True)
class PriorSpec:
    """Independent priors for every free parameter; tau is given through tau - 1"""
    eta: GammaPrior = field(default_factory=lambda: GammaPrior(0.1, 0.1))
    c: GammaPrior = field(default_factory=lambda: GammaPrior(0.1, 0.1))
    tau_minus_one: GammaPrior = field(default_factory=lambda: GammaPrior(1.0, 1.0))
    sigma: SigmaPrior = field(default_factory=UniformPrior)
    lam: GammaPrior = field(default_factory=lambda: GammaPrior(0.1, 0.1))

    def __post_init__(self):
        if isinstance(self.sigma, UniformPrior) and not (0.0 <= self.sigma.low and self.sigma.high <= 1.0):
            raise DomainError("a uniform sigma prior must lie inside [0, 1]")

    @property
    def sigma_support(self) -> str:
        return SIGMA_BELOW_ONE if isinstance(self.sigma, NormalPrior) else SIGMA_UNIT

    @classmethod
    def widened(cls, **overrides) -> "PriorSpec":
        """Priors allowing finite-activity fits: sigma over (-inf, 1)"""
        return cls(sigma=NormalPrior(0.0, 1.0), **overrides)

    def marginal_logpdf(self, name: str, x: float) -> float:
        if name == "tau":
            return self.tau_minus_one.logpdf(x - 1.0)
        return getattr(self, name).logpdf(x)

    def marginal_cdf(self, name: str, x):
        """Prior distribution function of one natural parameter"""
        if name == "tau":
            return self.tau_minus_one.cdf(np.asarray(x) - 1.0)
        return getattr(self, name).cdf(x)


def log_prior(prior: PriorSpec, natural: Mapping[str, float]) -> float:
    """Sum of natural-space log prior densities; LOG_ZERO outside the support"""
    total = 0.0
    for name, value in natural.items():
        lp = prior.marginal_logpdf(name, float(value))
        if lp == LOG_ZERO:
            return LOG_ZERO
        total += lp
    return total


def _forward(name: str, x: float, sigma_support: str) -> float:
    if name in ("eta", "c", "lam"):
        if not x > 0.0:
            raise DomainError(f"{name} must be positive, got {x}")
        return math.log(x)
    if name == "tau":
        if not x > 1.0:
            raise DomainError(f"tau must exceed 1, got {x}")
        return math.log(x - 1.0)
    if name == "sigma":
        if sigma_support == SIGMA_BELOW_ONE:
            if not x < 1.0:
                raise DomainError(f"sigma must be < 1, got {x}")
            return math.log1p(-x)
        if not 0.0 < x < 1.0:
            raise DomainError(f"sigma must lie in (0, 1), got {x}")
        return float(special.logit(x))
    raise DomainError(f"unknown parameter {name}")


def _inverse(name: str, z: float, sigma_support: str) -> float:
    if name in ("eta", "c", "lam", "tau"):
        with np.errstate(over="ignore"):
            value = float(np.exp(z))
        return 1.0 + value if name == "tau" else value
    if sigma_support == SIGMA_BELOW_ONE:
        return -math.expm1(z)
    return float(special.expit(z))


def _log_jacobian_term(name: str, z: float, sigma_support: str) -> float:
    if name == "sigma" and sigma_support == SIGMA_UNIT:
        # d expit(z) / dz = expit(z) expit(-z)
        return -float(np.logaddexp(0.0, -z)) - float(np.logaddexp(0.0, z))
    return z


def transform_params(natural: Mapping[str, float], names: Sequence[str],
                     sigma_support: str = SIGMA_UNIT) -> np.ndarray:
    """Map natural values to the unconstrained proposal space"""
    return np.array([_forward(n, float(natural[n]), sigma_support) for n in names])


def inverse_transform_params(z: Sequence[float], names: Sequence[str],
                             sigma_support: str = SIGMA_UNIT) -> Dict[str, float]:
    return {n: _inverse(n, float(v), sigma_support) for n, v in zip(names, z)}


def log_jacobian(z: Sequence[float], names: Sequence[str], sigma_support: str = SIGMA_UNIT) -> float:
    """log |d natural / d transformed|"""
    return sum(_log_jacobian_term(n, float(v), sigma_support) for n, v in zip(names, z))


def log_prior_transformed(prior: PriorSpec, z: Sequence[float], names: Sequence[str]) -> float:
    """Prior density of the transformed vector, Jacobian included"""
    support = prior.sigma_support
    natural = inverse_transform_params(z, names, support)
    # expit saturates at 1.0 and exp overflows for extreme proposals
    if any(not math.isfinite(v) for v in natural.values()):
        return LOG_ZERO
    lp = log_prior(prior, natural)
    if lp == LOG_ZERO:
        return LOG_ZERO
    return lp + log_jacobian(z, names, support)
