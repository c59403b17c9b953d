"""
Special functions and quadrature kernels.

The lower incomplete gamma function is evaluated with the classical split:
power series when x < s + 1, Lentz continued fraction for the upper
function otherwise. Everything downstream works with its logarithm so
that c**tau factors and tiny arguments never overflow or underflow.
"""

import heapq
import logging
import math
import sys
import warnings
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy import integrate, special

from ..errors import ConvergenceError, DomainError, QuadratureError

logger = logging.getLogger(__name__)

SERIES_TOL = 1e-14
MAX_SERIES_TERMS = 10_000
_EPS = sys.float_info.epsilon
_TINY = 1e-300


@dataclass(frozen=True)
class EvalResult:
    """A numeric value together with an absolute error bound"""
    value: float
    abs_err_bound: float

    def __post_init__(self):
        if not (self.abs_err_bound >= 0.0 and math.isfinite(self.abs_err_bound)):
            raise ValueError(f"Invalid error bound {self.abs_err_bound}")


def _check_gamma_args(s: float, x: float):
    if not (s > 0.0 and math.isfinite(s)):
        raise DomainError(f"shape s must be positive and finite, got {s}")
    if not (x >= 0.0):
        raise DomainError(f"argument x must be non-negative, got {x}")


def _log_series(s: float, x: float) -> Tuple[float, int]:
    """log of sum_{n>=0} x^n / (s (s+1) ... (s+n)); gamma(s,x) = x^s e^-x times the sum"""
    term = 1.0 / s
    total = term
    ap = s
    for n in range(1, MAX_SERIES_TERMS + 1):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * SERIES_TOL:
            return math.log(total), n
    raise ConvergenceError(f"incomplete gamma series did not converge for s={s}, x={x}")


def _log_upper_continued_fraction(s: float, x: float) -> Tuple[float, int]:
    """log Gamma(s, x) by the modified Lentz continued fraction"""
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_SERIES_TERMS + 1):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < SERIES_TOL:
            return -x + s * math.log(x) + math.log(h), i
    raise ConvergenceError(f"incomplete gamma continued fraction did not converge for s={s}, x={x}")


def _log_lower_gamma_with_error(s: float, x: float) -> Tuple[float, float]:
    """Returns (log gamma(s,x), relative error bound)"""
    _check_gamma_args(s, x)
    if x == 0.0:
        return -math.inf, 0.0
    if x < s + 1.0:
        log_sum, n = _log_series(s, x)
        return s * math.log(x) - x + log_sum, (n + 10) * _EPS + SERIES_TOL
    log_upper, n = _log_upper_continued_fraction(s, x)
    lg = special.gammaln(s)
    ratio = math.exp(log_upper - lg)
    # ratio = Q(s, x) stays well below 1 on this branch
    value = lg + math.log1p(-ratio)
    rel = ((n + 10) * _EPS + SERIES_TOL) * (1.0 + ratio) / (1.0 - ratio)
    return value, rel


def lower_incomplete_gamma(s: float, x: float) -> EvalResult:
    """
    gamma(s, x) = integral_0^x t^(s-1) e^(-t) dt

    Raises DomainError when the value exceeds the double range; the log is
    still available from log_lower_incomplete_gamma.
    """
    log_value, rel = _log_lower_gamma_with_error(float(s), float(x))
    try:
        value = math.exp(log_value)
    except OverflowError:
        raise DomainError(f"gamma({s}, {x}) = exp({log_value:.6g}) overflows a double; "
                          f"use log_lower_incomplete_gamma") from None
    return EvalResult(value=value, abs_err_bound=rel * value)


def _log_lower_gamma_scalar(s: float, x: float) -> float:
    return _log_lower_gamma_with_error(float(s), float(x))[0]


_log_lower_gamma_vec = np.vectorize(_log_lower_gamma_scalar, otypes=[float])


def log_lower_incomplete_gamma(s, x):
    """log gamma(s, x); broadcasts over array arguments"""
    if np.ndim(s) == 0 and np.ndim(x) == 0:
        return _log_lower_gamma_scalar(s, x)
    return _log_lower_gamma_vec(s, x)


def regularized_lower_gamma(s, x):
    """P(s, x) = gamma(s, x) / Gamma(s), the Gamma(s, 1) distribution function"""
    return np.exp(log_lower_incomplete_gamma(s, x) - special.gammaln(s))


def log_gamma(s: float) -> float:
    if not (s > 0.0 and math.isfinite(s)):
        raise DomainError(f"log_gamma requires s > 0, got {s}")
    return float(special.gammaln(s))


def gamma_recurrence_residual(s: float, x: float) -> float:
    """s*gamma(s,x) - gamma(s+1,x) - x^s e^-x, which vanishes identically"""
    if not x > 0.0:
        raise DomainError(f"x must be positive, got {x}")
    lower_s = lower_incomplete_gamma(s, x).value
    lower_s1 = lower_incomplete_gamma(s + 1.0, x).value
    return s * lower_s - lower_s1 - math.exp(s * math.log(x) - x)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def _gl_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def adaptive_gauss_legendre(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rel_tol: float = 1e-10,
    order: int = 20,
    max_intervals: int = 4000,
) -> EvalResult:
    """
    Globally adaptive Gauss-Legendre quadrature of a vectorised integrand.

    Each interval carries the difference between its single-panel estimate
    and the sum of its two halves as error estimate; the interval with the
    largest estimate is bisected until the total falls under
    rel_tol * |integral|.
    """
    nodes, weights = _gl_rule(order)

    def panel(lo: float, hi: float) -> float:
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        return float(half * np.dot(weights, f(mid + half * nodes)))

    def split(lo: float, hi: float, whole: float):
        mid = 0.5 * (lo + hi)
        left = panel(lo, mid)
        right = panel(mid, hi)
        return (lo, mid, left), (mid, hi, right), abs(left + right - whole)

    left, right, err = split(a, b, panel(a, b))
    # children inherit half the parent's error estimate until split themselves
    heap = [(-0.5 * err, *left), (-0.5 * err, *right)]
    total = left[2] + right[2]
    total_err = err
    n_intervals = 2

    while total_err > rel_tol * abs(total):
        if n_intervals >= max_intervals:
            raise QuadratureError(
                f"Gauss-Legendre did not converge on [{a}, {b}]: "
                f"error {total_err:.3e} after {n_intervals} intervals"
            )
        neg_err, lo, hi, est = heapq.heappop(heap)
        left, right, err = split(lo, hi, est)
        heapq.heappush(heap, (-0.5 * err, *left))
        heapq.heappush(heap, (-0.5 * err, *right))
        n_intervals += 1
        total += left[2] + right[2] - est
        total_err += err + neg_err

    total = math.fsum(item[3] for item in heap)
    total_err = math.fsum(-item[0] for item in heap)
    logger.debug(f"Gauss-Legendre on [{a}, {b}] used {n_intervals} intervals")
    return EvalResult(value=total, abs_err_bound=total_err)


def quad_checked(
    f: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 0.0,
    limit: int = 500,
) -> EvalResult:
    """scipy.integrate.quad that raises QuadratureError instead of warning"""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=limit, full_output=1)
    value, err = out[0], out[1]
    if not math.isfinite(value):
        raise QuadratureError(f"non-finite integral on [{a}, {b}]")
    accepted = max(abs_tol, 100.0 * rel_tol * abs(value))
    if len(out) > 3:
        if err > accepted:
            raise QuadratureError(f"quad on [{a}, {b}] failed: {out[3]} (error {err:.3e})")
        logger.warning(f"quad warning on [{a}, {b}] within tolerance: {out[3]}")
    return EvalResult(value=float(value), abs_err_bound=float(err))
