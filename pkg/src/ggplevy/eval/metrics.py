"""
Goodness-of-fit and loss metrics for posterior output.

Empirical quantiles use the lower (inverse distribution function)
convention throughout: the q-quantile of a sample is its smallest value
whose empirical distribution function reaches q.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np
from scipy import stats

from ..errors import DimensionError, DomainError

logger = logging.getLogger(__name__)

QUANTILE_METHOD = "inverted_cdf"
MIN_POSTERIOR_ROWS = 100


def _nonempty(name: str, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise DimensionError(f"{name} is empty")
    return arr


def ks_statistic(sample_a, sample_b_or_cdf: Union[Callable, np.ndarray, list]) -> float:
    """
    Kolmogorov-Smirnov distance: two-sample when given another sample,
    one-sample when given a distribution function.
    """
    a = _nonempty("sample_a", sample_a)
    if callable(sample_b_or_cdf):
        return float(stats.kstest(a, sample_b_or_cdf).statistic)
    b = _nonempty("sample_b", sample_b_or_cdf)
    return float(stats.ks_2samp(a, b, method="asymp").statistic)


@dataclass
class ZetaResult:
    """Posterior survival probabilities at the true latent values"""
    zeta: np.ndarray
    ks_vs_uniform: float


def zeta_coverage(vbar_true, vbar_draws) -> ZetaResult:
    """
    zeta_k = fraction of posterior draws with Vbar_k >= the true value
    (ties count as covered), and the KS distance of zeta to Uniform(0, 1).
    """
    truth = _nonempty("vbar_true", vbar_true)
    draws = np.asarray(vbar_draws, dtype=float)
    if draws.ndim != 2 or draws.shape[1] != truth.size:
        raise DimensionError(f"draws of shape {draws.shape} do not match {truth.size} true values")
    if draws.shape[0] < MIN_POSTERIOR_ROWS:
        raise DimensionError(f"need at least {MIN_POSTERIOR_ROWS} posterior rows, got {draws.shape[0]}")
    zeta = np.mean(draws >= truth[None, :], axis=0)
    return ZetaResult(zeta=zeta, ks_vs_uniform=ks_statistic(zeta, stats.uniform.cdf))


class LossKind(str, Enum):
    L2 = "l2"
    L1_ALPHA = "l1_alpha"


@dataclass(frozen=True)
class LossSpec:
    """Squared loss, or the asymmetric absolute loss whose Bayes estimator is the alpha-quantile"""
    kind: LossKind = LossKind.L2
    alpha: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if self.kind is LossKind.L1_ALPHA and not (self.alpha is not None and 0.0 < self.alpha < 1.0):
            raise DomainError(f"l1_alpha loss needs alpha in (0, 1), got {self.alpha}")

    @property
    def label(self) -> str:
        return "l2" if self.kind is LossKind.L2 else f"l1_{self.alpha:g}"


def bayes_estimate(draws, loss: LossSpec, axis: Optional[int] = None):
    """Posterior mean (L2) or lower empirical alpha-quantile (L1_ALPHA)"""
    arr = np.asarray(draws, dtype=float)
    if arr.size == 0:
        raise DimensionError("draws are empty")
    if loss.kind is LossKind.L2:
        out = np.mean(arr, axis=axis)
    else:
        out = np.quantile(arr, loss.alpha, axis=axis, method=QUANTILE_METHOD)
    return float(out) if np.ndim(out) == 0 else out


def l1_alpha_loss(x, y, alpha: float):
    """x - y when x >= y, else (1 - alpha) / alpha * |x - y|"""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return np.where(diff >= 0.0, diff, -diff * (1.0 - alpha) / alpha)


def average_loss(true_vals, estimates, loss: LossSpec) -> float:
    x = _nonempty("true_vals", true_vals)
    y = _nonempty("estimates", estimates)
    if x.size != y.size:
        raise DimensionError(f"{x.size} true values but {y.size} estimates")
    if loss.kind is LossKind.L2:
        return float(np.mean((x - y) ** 2))
    return float(np.mean(l1_alpha_loss(x, y, loss.alpha)))
