"""
The generalised gamma-Pareto (GGP) subordinator and its normal variance
mixture (NGGP): intensities, Laplace exponent, cumulants, exact increment
samplers, the GBFRY law and tail diagnostics.

Parameters follow (eta, sigma, tau, c): eta scales time, sigma < 1 sets
small-jump activity, tau > 0 is the power-law tail exponent and c is an
inverse scale. The Levy intensity is

    rho(w) = eta / (c^tau Gamma(1-sigma)) w^(-1-tau)
             [gamma(tau-sigma+1, cw) + (cw)^(tau-sigma) e^(-cw)]
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, special

from ..errors import DomainError, MomentDivergenceError, RegimeError
from .rng import (
    RngStream,
    Size,
    sample_beta,
    sample_gamma,
    sample_gg_increment,
    sample_normal,
    sample_pareto,
    sample_poisson,
)
from .special import adaptive_gauss_legendre, log_lower_incomplete_gamma, quad_checked

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# |sigma| below this is treated as exactly 0
SIGMA_ZERO_TOL = 1e-10
LAPLACE_REL_TOL = 1e-10
TAIL_REL_TOL = 1e-10
# erfc(26) underflows double precision relative to anything we add it to
_ERFC_CUTOFF_SQ = 2.0 * 26.0**2
_NU_UPPER_FACTOR = 1e14


@dataclass(frozen=True)
class GgpParams:
    """The four GGP parameters with their derived regime flags"""
    eta: float
    sigma: float
    tau: float
    c: float

    def __post_init__(self):
        for name in ("eta", "tau", "c"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise DomainError(f"{name} must be positive and finite, got {value}")
        if not (math.isfinite(self.sigma) and self.sigma < 1.0):
            raise DomainError(f"sigma must be finite and < 1, got {self.sigma}")
        if abs(self.sigma) < SIGMA_ZERO_TOL:
            object.__setattr__(self, "sigma", 0.0)

    @property
    def finite_activity(self) -> bool:
        return self.sigma < 0.0

    @property
    def bg_index(self) -> float:
        """Blumenthal-Getoor index of the subordinator"""
        return max(0.0, self.sigma)

    def as_dict(self) -> dict:
        return {"eta": self.eta, "sigma": self.sigma, "tau": self.tau, "c": self.c}


@dataclass
class IncrementSample:
    """
    One (or a batch of) increment draws with the mixture decomposition.

    For sigma >= 0 value = gg_part + cp_part where cp_part sums jump_count
    Gamma x Pareto jumps; for sigma < 0 gg_part is 0.
    """
    value: ArrayLike
    gg_part: ArrayLike
    cp_part: ArrayLike
    jump_count: ArrayLike


@dataclass(frozen=True)
class GbfryParams:
    """Generalised BFRY law: Gamma(kappa, c) / Beta(tau, 1)"""
    kappa: float
    tau: float
    c: float

    def __post_init__(self):
        for name in ("kappa", "tau", "c"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise DomainError(f"{name} must be positive and finite, got {value}")


def _positive_array(name: str, x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError(f"{name} must be positive, got {x}")
    return arr


def _scalar_or_array(values: np.ndarray, like: ArrayLike):
    if np.ndim(like) == 0:
        return float(values)
    return values


# ---------------------------------------------------------------------------
# Intensities
# ---------------------------------------------------------------------------

def log_levy_intensity(p: GgpParams, w: ArrayLike):
    w_arr = _positive_array("w", w)
    cw = p.c * w_arr
    log_norm = math.log(p.eta) - p.tau * math.log(p.c) - special.gammaln(1.0 - p.sigma)
    bracket = np.logaddexp(
        log_lower_incomplete_gamma(p.tau - p.sigma + 1.0, cw),
        (p.tau - p.sigma) * np.log(cw) - cw,
    )
    return _scalar_or_array(log_norm - (1.0 + p.tau) * np.log(w_arr) + bracket, w)


def levy_intensity(p: GgpParams, w: ArrayLike):
    """rho(w), valid for every tau > 0 and sigma < 1"""
    return _scalar_or_array(np.exp(log_levy_intensity(p, w)), w)


def ggp_tail_constant(p: GgpParams) -> float:
    """C such that the tail intensity behaves as C x^-tau for large x"""
    return math.exp(
        math.log(p.eta) + special.gammaln(p.tau - p.sigma + 1.0)
        - math.log(p.tau) - p.tau * math.log(p.c) - special.gammaln(1.0 - p.sigma)
    )


def _tail_intensity_scalar(p: GgpParams, x: float) -> float:
    x_star = max(100.0 / p.c, 100.0 * x)

    def integrand(v: float) -> float:
        w = math.exp(v)
        return levy_intensity(p, w) * w

    body = quad_checked(integrand, math.log(x), math.log(x_star), rel_tol=TAIL_REL_TOL)
    # beyond x_star the bracket equals Gamma(tau-sigma+1) up to e^-100 relative
    return body.value + ggp_tail_constant(p) * x_star ** (-p.tau)


def tail_intensity(p: GgpParams, x: ArrayLike):
    """Expected number of jumps larger than x per unit time"""
    x_arr = _positive_array("x", x)
    values = np.array([_tail_intensity_scalar(p, float(v)) for v in x_arr.ravel()]).reshape(x_arr.shape)
    return _scalar_or_array(values, x)


def background_intensity(p: GgpParams, w: ArrayLike):
    """Intensity -rho(w) - w rho'(w) of the background driving process (sigma >= 0)"""
    if p.sigma < 0.0:
        raise RegimeError("the GGP law is self-decomposable only for sigma >= 0")
    w_arr = _positive_array("w", w)
    lg = special.gammaln(1.0 - p.sigma)
    log_w = np.log(w_arr)
    cw = p.c * w_arr
    cp_term = (
        math.log(p.eta * p.tau) - p.tau * math.log(p.c) - lg
        - (1.0 + p.tau) * log_w + log_lower_incomplete_gamma(p.tau - p.sigma + 1.0, cw)
    )
    if p.sigma == 0.0:
        return _scalar_or_array(np.exp(cp_term), w)
    gg_term = math.log(p.eta * p.sigma) - p.sigma * math.log(p.c) - lg - (1.0 + p.sigma) * log_w - cw
    return _scalar_or_array(np.exp(np.logaddexp(gg_term, cp_term)), w)


# ---------------------------------------------------------------------------
# Laplace exponent and cumulants
# ---------------------------------------------------------------------------

def _laplace_exponent_scalar(p: GgpParams, theta: float) -> float:
    if theta == 0.0:
        return 0.0

    def g(r: np.ndarray) -> np.ndarray:
        # 1 - (1 + theta/u)^(sigma-1) at u = c r^(1/tau)
        u = p.c * r ** (1.0 / p.tau)
        return -np.expm1((p.sigma - 1.0) * np.log1p(theta / u))

    inner = adaptive_gauss_legendre(g, 0.0, 1.0, rel_tol=LAPLACE_REL_TOL).value / p.tau
    ratio = math.log1p(theta / p.c)
    if p.sigma == 0.0:
        outer = ratio
    else:
        outer = math.expm1(p.sigma * ratio) / p.sigma
    return p.eta * (inner + outer)


def laplace_exponent(p: GgpParams, theta: ArrayLike):
    """psi(theta) with E[exp(-theta Z_t)] = exp(-t psi(theta))"""
    th = np.asarray(theta, dtype=float)
    if np.any(~(th >= 0.0)):
        raise DomainError(f"theta must be non-negative, got {theta}")
    values = np.array([_laplace_exponent_scalar(p, float(v)) for v in th.ravel()]).reshape(th.shape)
    return _scalar_or_array(values, theta)


def _check_order(m: int):
    if int(m) != m or m < 1:
        raise DomainError(f"cumulant order must be a positive integer, got {m}")


def cumulant(p: GgpParams, t: float, m: int) -> float:
    """
    kappa_m(Z_t) = t eta (tau - sigma) Gamma(m - sigma) / (Gamma(1 - sigma) c^m (tau - m)), m < tau.

    The Gamma ratio is 1 for m = 1 and for sigma = 0.
    """
    _check_order(m)
    if not t > 0.0:
        raise DomainError(f"t must be positive, got {t}")
    if m >= p.tau:
        raise MomentDivergenceError(f"E[Z_t^{m}] is infinite for tau={p.tau}")
    log_ratio = special.gammaln(m - p.sigma) - special.gammaln(1.0 - p.sigma)
    return t * p.eta * (p.tau - p.sigma) * math.exp(log_ratio) / (p.c**m * (p.tau - m))


def nggp_cumulant(p: GgpParams, t: float, m: int) -> float:
    """kappa_m(X_t): 0 for odd m, (m-1)!! kappa_{m/2}(Z_t) for even m < 2 tau"""
    _check_order(m)
    if m >= 2.0 * p.tau:
        raise MomentDivergenceError(f"E[|X_t|^{m}] is infinite for tau={p.tau}")
    if m % 2 == 1:
        return 0.0
    half = m // 2
    double_factorial = 2.0**half * math.gamma(half + 0.5) / math.sqrt(math.pi)
    return double_factorial * cumulant(p, t, half)


def nggp_excess_kurtosis(p: GgpParams, t: float) -> float:
    if p.tau <= 2.0:
        raise MomentDivergenceError(f"kurtosis is infinite for tau={p.tau} <= 2")
    return nggp_cumulant(p, t, 4) / nggp_cumulant(p, t, 2) ** 2


# ---------------------------------------------------------------------------
# Increment samplers
# ---------------------------------------------------------------------------

def _compound_sum(rng: RngStream, counts: np.ndarray, shape: float, c: float, tau: float) -> np.ndarray:
    """Per-entry sums of counts[i] Gamma(shape, c) * Pareto(tau, 1) jumps"""
    total = int(counts.sum())
    if total == 0:
        return np.zeros(counts.size)
    jumps = sample_gamma(rng, shape, c, size=total) * sample_pareto(rng, tau, 1.0, size=total)
    owner = np.repeat(np.arange(counts.size), counts)
    return np.bincount(owner, weights=jumps, minlength=counts.size)


def sample_ggp_increment(rng: RngStream, p: GgpParams, t: ArrayLike, size: Size = None) -> IncrementSample:
    """
    Exact draw of Z_t ~ GGP(t eta, sigma, tau, c).

    sigma < 0: compound Poisson with rate t eta (tau-sigma)/(-sigma tau) and
    Gamma(-sigma, c) x Pareto(tau, 1) jumps.
    sigma >= 0: GG(eta t / c^sigma, sigma, c) plus Poisson(eta t / tau) many
    Gamma(1-sigma, c) x Pareto(tau, 1) jumps.
    """
    t_arr = _positive_array("t", t)
    scalar = size is None and t_arr.ndim == 0
    shape = size if size is not None else t_arr.shape
    t_flat = np.broadcast_to(t_arr, shape).ravel()

    if p.sigma < 0.0:
        rate = t_flat * p.eta * (p.tau - p.sigma) / (-p.sigma * p.tau)
        counts = np.atleast_1d(sample_poisson(rng, rate))
        cp = _compound_sum(rng, counts, -p.sigma, p.c, p.tau)
        gg = np.zeros_like(cp)
    else:
        gg = np.atleast_1d(sample_gg_increment(rng, p.eta * t_flat / p.c**p.sigma, p.sigma, p.c))
        counts = np.atleast_1d(sample_poisson(rng, p.eta * t_flat / p.tau))
        cp = _compound_sum(rng, counts, 1.0 - p.sigma, p.c, p.tau)

    value = gg + cp
    if scalar:
        return IncrementSample(value=float(value[0]), gg_part=float(gg[0]), cp_part=float(cp[0]),
                               jump_count=int(counts[0]))
    return IncrementSample(
        value=value.reshape(shape),
        gg_part=gg.reshape(shape),
        cp_part=cp.reshape(shape),
        jump_count=counts.reshape(shape),
    )


def sample_nggp_increment(rng: RngStream, p: GgpParams, t: ArrayLike, size: Size = None):
    """X_t = sqrt(Z_t) * N(0, 1)"""
    z = sample_ggp_increment(rng, p, t, size).value
    eps = sample_normal(rng, np.shape(z))
    x = np.sqrt(z) * eps
    return float(x) if np.ndim(x) == 0 else x


# ---------------------------------------------------------------------------
# GBFRY law
# ---------------------------------------------------------------------------

def gbfry_logpdf(g: GbfryParams, x: ArrayLike):
    x_arr = _positive_array("x", x)
    values = (
        math.log(g.tau) - g.tau * math.log(g.c) - special.gammaln(g.kappa)
        - (1.0 + g.tau) * np.log(x_arr) + log_lower_incomplete_gamma(g.kappa + g.tau, g.c * x_arr)
    )
    return _scalar_or_array(values, x)


def gbfry_pdf(g: GbfryParams, x: ArrayLike):
    return _scalar_or_array(np.exp(gbfry_logpdf(g, x)), x)


def gbfry_cdf(g: GbfryParams, x: ArrayLike):
    """F(x) = P(kappa, cx) - x^-tau gamma(kappa+tau, cx) / (c^tau Gamma(kappa))"""
    x_arr = np.asarray(x, dtype=float)
    out = np.zeros(x_arr.shape)
    pos = x_arr > 0.0
    if np.any(pos):
        xp = x_arr[pos]
        lg = special.gammaln(g.kappa)
        p_kappa = np.exp(log_lower_incomplete_gamma(g.kappa, g.c * xp) - lg)
        correction = np.exp(
            -g.tau * np.log(xp) + log_lower_incomplete_gamma(g.kappa + g.tau, g.c * xp)
            - g.tau * math.log(g.c) - lg
        )
        out[pos] = np.clip(p_kappa - correction, 0.0, 1.0)
    return _scalar_or_array(out, x)


def gbfry_moment(g: GbfryParams, m: float) -> float:
    """E[X^m] = tau Gamma(m + kappa) / (c^m (tau - m) Gamma(kappa)) for m < tau"""
    if m >= g.tau:
        raise MomentDivergenceError(f"E[X^{m}] is infinite for tau={g.tau}")
    return g.tau * math.exp(special.gammaln(m + g.kappa) - special.gammaln(g.kappa)) / (g.c**m * (g.tau - m))


def gbfry_quantile(g: GbfryParams, q: float) -> float:
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {q}")
    lo, hi = 1e-300, 1.0 / g.c
    while gbfry_cdf(g, hi) < q:
        hi *= 2.0
    return optimize.brentq(lambda v: gbfry_cdf(g, v) - q, lo, hi, xtol=1e-14, rtol=1e-12)


def sample_gbfry(rng: RngStream, g: GbfryParams, size: Size = None):
    y = sample_gamma(rng, g.kappa, g.c, size=size)
    z = sample_beta(rng, g.tau, 1.0, size=size)
    return y / z


# ---------------------------------------------------------------------------
# Tail asymptotics of the normal mixture
# ---------------------------------------------------------------------------

def small_jump_slowly_varying(p: GgpParams, t: float) -> float:
    """l(t) with tail intensity ~ l(1/x) x^-bg_index as x -> 0"""
    if p.sigma > 0.0:
        return math.exp(
            math.log(p.eta) - p.sigma * math.log(p.c) - math.log(p.sigma) - special.gammaln(1.0 - p.sigma)
        )
    if p.sigma == 0.0:
        return p.eta * math.log(t)
    return p.eta * (p.tau - p.sigma) / (-p.sigma * p.tau)


def _abs_normal_moment_factor(order: float) -> float:
    """E|N|^(2 order) = 2^order Gamma(order + 1/2) / sqrt(pi)"""
    return 2.0**order * math.gamma(order + 0.5) / math.sqrt(math.pi)


def nggp_tail_constant(p: GgpParams) -> float:
    """C1 with Pr(|X_t| > x) ~ t C1 x^(-2 tau) as x -> infinity"""
    return _abs_normal_moment_factor(p.tau) * ggp_tail_constant(p)


def nggp_small_jump_constant(p: GgpParams, x: float) -> float:
    """Leading small-x behaviour nu_bar(x) x^(2 alpha) of the NGGP tail intensity"""
    alpha = p.bg_index
    return _abs_normal_moment_factor(alpha) * small_jump_slowly_varying(p, 1.0 / x**2)


def nggp_levy_tail(p: GgpParams, x: float) -> float:
    """
    nu_bar(x): intensity of NGGP jumps with |size| > x, computed as
    integral of rho(w) erfc(x / sqrt(2w)) dw.
    """
    if not x > 0.0:
        raise DomainError(f"x must be positive, got {x}")
    lower = x * x / _ERFC_CUTOFF_SQ
    upper = x * x * _NU_UPPER_FACTOR

    def integrand(v: float) -> float:
        w = math.exp(v)
        return levy_intensity(p, w) * w * math.erfc(x / math.sqrt(2.0 * w))

    body = quad_checked(integrand, math.log(lower), math.log(upper), rel_tol=1e-9)
    # erfc(x / sqrt(2w)) is 1 to within 1e-7 above ``upper``
    return body.value + _tail_intensity_scalar(p, upper)


def tauberian_check(p: GgpParams, x_grid: Sequence[float]) -> List[Tuple[float, float]]:
    """(x, nu_bar(x)) pairs for comparing against the regular-variation asymptotes"""
    if len(x_grid) == 0:
        raise DomainError("x_grid must be non-empty")
    return [(float(x), nggp_levy_tail(p, float(x))) for x in x_grid]
