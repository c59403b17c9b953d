"""
Seeded random streams and the primitive samplers built on them.

Every sampler takes an RngStream first and an optional ``size``; with
``size=None`` and scalar parameters it returns a Python float (or int),
otherwise a numpy array. Parameters broadcast against ``size``.

The exponentially tilted stable sampler combines divide-and-conquer
rejection for small tilts with double rejection for large ones,
vectorised over per-draw tilts.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import ConvergenceError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
Size = Optional[Union[int, Tuple[int, ...]]]

MAX_REJECTION_ROUNDS = 1_000_000
# lambda**sigma below this uses divide-and-conquer, above it double rejection
DIVIDE_CONQUER_MAX_COST = 5.0
_UINT64_MAX = 2**64 - 1


class RngStream:
    """
    A counter-based (Philox) generator keyed by (seed, stream_id).

    Streams sharing a seed but with different stream ids are independent,
    so chains and workers never need to coordinate. A stream is mutable and
    must only be used by one owner at a time.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if not (0 <= int(seed) <= _UINT64_MAX):
            raise DomainError(f"seed must fit in 64 bits, got {seed}")
        if not (0 <= int(stream_id) <= _UINT64_MAX):
            raise DomainError(f"stream_id must fit in 64 bits, got {stream_id}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(seq))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    # raw draws used by the samplers below
    def random(self, size: Size = None):
        """Uniform on [0, 1)"""
        return self.generator.random(size)

    def standard_normal(self, size: Size = None):
        return self.generator.standard_normal(size)

    def standard_exponential(self, size: Size = None):
        return self.generator.standard_exponential(size)


def _as_output(values: np.ndarray, scalar: bool):
    if scalar:
        return values.item()
    return values


def _is_scalar_call(size: Size, *params) -> bool:
    return size is None and all(np.ndim(p) == 0 for p in params)


def _require_positive(name: str, value: ArrayLike):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{name} must be positive and finite, got {value}")


# ---------------------------------------------------------------------------
# Primitive laws
# ---------------------------------------------------------------------------

def sample_uniform(rng: RngStream, size: Size = None):
    """Uniform on (0, 1]; never returns 0 so logs and negative powers stay finite"""
    return 1.0 - rng.random(size)


def sample_normal(rng: RngStream, size: Size = None):
    return rng.standard_normal(size)


def sample_exponential(rng: RngStream, rate: ArrayLike = 1.0, size: Size = None):
    _require_positive("rate", rate)
    scalar = _is_scalar_call(size, rate)
    draws = rng.standard_exponential(size if size is not None else np.shape(rate)) / np.asarray(rate)
    return _as_output(np.asarray(draws), scalar)


def sample_gamma(rng: RngStream, shape: ArrayLike, rate: ArrayLike, size: Size = None):
    """
    Gamma(shape, rate) with mean shape / rate.

    numpy's generator uses Marsaglia-Tsang squeeze rejection, boosted by
    a uniform power when shape < 1, so small shapes such as 1 - sigma are
    sampled exactly.
    """
    _require_positive("shape", shape)
    _require_positive("rate", rate)
    scalar = _is_scalar_call(size, shape, rate)
    if size is None:
        size = np.broadcast(np.asarray(shape), np.asarray(rate)).shape
    draws = rng.generator.standard_gamma(shape, size) / np.asarray(rate)
    return _as_output(np.asarray(draws, dtype=float), scalar)


def sample_beta(rng: RngStream, a: ArrayLike, b: ArrayLike, size: Size = None):
    _require_positive("a", a)
    _require_positive("b", b)
    scalar = _is_scalar_call(size, a, b)
    if size is None:
        size = np.broadcast(np.asarray(a), np.asarray(b)).shape
    return _as_output(np.asarray(rng.generator.beta(a, b, size), dtype=float), scalar)


def sample_poisson(rng: RngStream, rate: ArrayLike, size: Size = None):
    arr = np.asarray(rate, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise DomainError(f"Poisson rate must be non-negative and finite, got {rate}")
    scalar = _is_scalar_call(size, rate)
    if size is None:
        size = arr.shape
    return _as_output(np.asarray(rng.generator.poisson(arr, size), dtype=np.int64), scalar)


def pareto_from_uniform(u: ArrayLike, tail: float, scale: float = 1.0):
    """Inverse distribution function of Pareto(tail, scale) applied to u in (0, 1]"""
    return scale * np.power(u, -1.0 / tail)


def sample_pareto(rng: RngStream, tail: float, scale: float = 1.0, size: Size = None):
    """Pareto(tail, scale) on [scale, inf), survival (x / scale)**-tail"""
    _require_positive("tail", tail)
    _require_positive("scale", scale)
    scalar = _is_scalar_call(size, tail, scale)
    u = sample_uniform(rng, size)
    return _as_output(np.asarray(pareto_from_uniform(u, tail, scale), dtype=float), scalar)


# ---------------------------------------------------------------------------
# Exponentially tilted stable law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TiltedStableParams:
    """
    Generalised gamma law GG(mass, sigma, tilt) for 0 < sigma < 1.

    Its Laplace transform is exp(-(mass / sigma) * ((theta + tilt)**sigma - tilt**sigma)).
    ``mass`` may be an array when draws over different time spans are needed.
    """
    mass: ArrayLike
    sigma: float
    tilt: float

    def __post_init__(self):
        _require_positive("mass", self.mass)
        if not (0.0 < self.sigma < 1.0):
            raise DomainError(f"tilted stable sigma must lie in (0, 1), got {self.sigma}")
        if not (self.tilt > 0.0 and math.isfinite(self.tilt)):
            raise DomainError(f"tilt must be positive and finite, got {self.tilt}")

    @property
    def log_scale(self) -> ArrayLike:
        """log s where GG = s * T and T has Laplace transform exp(-((lam + theta)**sigma - lam**sigma))"""
        return (np.log(self.mass) - math.log(self.sigma)) / self.sigma

    @property
    def lam_alpha(self) -> ArrayLike:
        """(tilt * s)**sigma, the cost indicator of the samplers"""
        return np.asarray(self.mass) * self.tilt**self.sigma / self.sigma


def _zolotarev(x: np.ndarray, alpha: float) -> np.ndarray:
    """Kanter's A(x) = [sin((1-a)x)^(1-a) sin(ax)^a / sin(x)]^(1/(1-a)) written with sinc"""
    num = ((1.0 - alpha) * np.sinc((1.0 - alpha) * x / np.pi)) ** (1.0 - alpha)
    num = num * (alpha * np.sinc(alpha * x / np.pi)) ** alpha
    return (num / np.sinc(x / np.pi)) ** (1.0 / (1.0 - alpha))


def _zolotarev_ratio(x: np.ndarray, alpha: float) -> np.ndarray:
    den = np.sinc(alpha * x / np.pi) ** alpha * np.sinc((1.0 - alpha) * x / np.pi) ** (1.0 - alpha)
    return np.sinc(x / np.pi) / den


def _sample_positive_stable(rng: RngStream, alpha: float, n: int) -> np.ndarray:
    """Kanter draws with Laplace transform exp(-theta**alpha)"""
    u = np.pi * rng.random(n)
    e = rng.standard_exponential(n)
    return (_zolotarev(u, alpha) / e) ** ((1.0 - alpha) / alpha)


def _divide_and_conquer(rng: RngStream, alpha: float, lam: np.ndarray, lam_alpha: np.ndarray) -> np.ndarray:
    k = lam.size
    n_pieces = np.maximum(1, np.floor(lam_alpha)).astype(np.int64)
    owner = np.repeat(np.arange(k), n_pieces)
    piece_scale = n_pieces[owner].astype(float) ** (-1.0 / alpha)
    piece_tilt = lam[owner] * piece_scale

    pieces = np.empty(owner.size)
    pending = np.arange(owner.size)
    rounds = 0
    while pending.size:
        rounds += 1
        if rounds > MAX_REJECTION_ROUNDS:
            raise ConvergenceError(f"divide-and-conquer exceeded {MAX_REJECTION_ROUNDS} rounds")
        s = _sample_positive_stable(rng, alpha, pending.size)
        u = sample_uniform(rng, pending.size)
        accepted = np.log(u) <= -piece_tilt[pending] * s
        pieces[pending[accepted]] = piece_scale[pending[accepted]] * s[accepted]
        pending = pending[~accepted]
    return np.bincount(owner, weights=pieces, minlength=k)


def _double_rejection_aux(rng: RngStream, alpha: float, lam_alpha: np.ndarray):
    """Auxiliary (U, Z, z) triple of the double-rejection method"""
    k = lam_alpha.size
    gamma = lam_alpha * alpha * (1.0 - alpha)
    sqrt_gamma = np.sqrt(gamma)
    c1 = math.sqrt(math.pi / 2.0)
    c3 = (2.0 + c1) * sqrt_gamma
    xi = (1.0 + math.sqrt(2.0) * c3) / math.pi
    psi = c3 * np.exp(-gamma * math.pi**2 / 8.0) / math.sqrt(math.pi)

    u_out = np.empty(k)
    big_z_out = np.empty(k)
    z_out = np.empty(k)
    pending = np.arange(k)
    rounds = 0
    while pending.size:
        rounds += 1
        if rounds > MAX_REJECTION_ROUNDS:
            raise ConvergenceError(f"double-rejection auxiliary loop exceeded {MAX_REJECTION_ROUNDS} rounds")
        n = pending.size
        g, sg, x_, ps, la = gamma[pending], sqrt_gamma[pending], xi[pending], psi[pending], lam_alpha[pending]
        w1 = c1 * x_ / sg
        w2 = 2.0 * math.sqrt(math.pi) * ps
        w3 = x_ * math.pi
        v = rng.random(n)
        w = rng.random(n)
        nrm = rng.standard_normal(n)
        big = g >= 1.0
        u = np.where(
            big,
            np.where(v < w1 / (w1 + w2), np.abs(nrm) / sg, math.pi * (1.0 - w * w)),
            np.where(v < w3 / (w2 + w3), math.pi * w, math.pi * (1.0 - w * w)),
        )
        inside = u < math.pi
        u_safe = np.where(inside, u, 0.5 * math.pi)
        zeta = np.sqrt(_zolotarev_ratio(u_safe, alpha))
        z = 1.0 / (1.0 - (1.0 + alpha * zeta / sg) ** (-1.0 / alpha))
        inv_prob = math.pi * np.exp(-la * (1.0 - 1.0 / (zeta * zeta))) / ((1.0 + c1) * sg / zeta + z)
        d = np.where(big, x_ * np.exp(-g * u_safe * u_safe / 2.0), 0.0)
        d += np.where(inside & (u_safe > 0.0), ps / np.sqrt(math.pi - u_safe), 0.0)
        d += np.where(~big & inside, x_, 0.0)
        accept_prob = np.where(inside, 1.0 / (inv_prob * d), 0.0)
        uniform = sample_uniform(rng, n)
        big_z = np.where(accept_prob > 0.0, uniform / np.where(accept_prob > 0.0, accept_prob, 1.0), np.inf)
        accepted = inside & (big_z <= 1.0)
        idx = pending[accepted]
        u_out[idx] = u[accepted]
        big_z_out[idx] = big_z[accepted]
        z_out[idx] = z[accepted]
        pending = pending[~accepted]
    return u_out, big_z_out, z_out


def _double_rejection(rng: RngStream, alpha: float, lam_alpha: np.ndarray) -> np.ndarray:
    """log of tilted stable draws T for tilts with lam**alpha = lam_alpha"""
    k = lam_alpha.size
    b = (1.0 - alpha) / alpha
    c1 = math.sqrt(math.pi / 2.0)
    log_lam = np.log(lam_alpha) / alpha

    log_out = np.empty(k)
    pending = np.arange(k)
    rounds = 0
    while pending.size:
        rounds += 1
        if rounds > MAX_REJECTION_ROUNDS:
            raise ConvergenceError(f"double rejection exceeded {MAX_REJECTION_ROUNDS} rounds")
        n = pending.size
        la = lam_alpha[pending]
        u, big_z, z = _double_rejection_aux(rng, alpha, la)
        a = _zolotarev(u, alpha)
        m = (b / a) ** alpha * la
        delta = np.sqrt(m * alpha / a)
        a1 = delta * c1
        a3 = z / a
        s = a1 + delta + a3

        v2 = rng.random(n)
        nrm = rng.standard_normal(n)
        mid = rng.random(n)
        e = rng.standard_exponential(n)
        first = v2 < a1 / s
        second = ~first & (v2 < (a1 + delta) / s)
        third = ~first & ~second
        x = np.where(first, m - delta * np.abs(nrm), np.where(second, m + delta * mid, m + delta + e * a3))

        positive = x > 0.0
        x_safe = np.where(positive, x, 1.0)
        log_accept = -(a * (x_safe - m) + np.exp(log_lam[pending] - b * np.log(m)) * ((m / x_safe) ** b - 1.0))
        log_accept += np.where(first & (x < m), 0.5 * nrm * nrm, 0.0)
        log_accept += np.where(third, e, 0.0)
        accepted = positive & (log_accept > np.log(big_z))
        log_out[pending[accepted]] = -b * np.log(x[accepted])
        pending = pending[~accepted]
    return log_out


def sample_tilted_stable(rng: RngStream, p: TiltedStableParams, size: Size = None):
    """
    Exact draws Y with E[exp(-theta Y)] = exp(-(mass/sigma)((theta + c)**sigma - c**sigma)).

    Y = s * T with s = (mass/sigma)**(1/sigma) and T tilted by lam = c * s. T is
    drawn by divide-and-conquer when lam**sigma < 5, by double rejection otherwise.
    """
    scalar = _is_scalar_call(size, p.mass)
    shape = size if size is not None else np.shape(p.mass)
    alpha = p.sigma
    log_scale = np.broadcast_to(np.asarray(p.log_scale, dtype=float), shape).ravel()
    lam_alpha = np.broadcast_to(np.asarray(p.lam_alpha, dtype=float), shape).ravel()

    log_t = np.empty(lam_alpha.size)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore", under="ignore"):
        small = lam_alpha < DIVIDE_CONQUER_MAX_COST
        if np.any(small):
            lam = np.exp(np.log(lam_alpha[small]) / alpha)
            log_t[small] = np.log(_divide_and_conquer(rng, alpha, lam, lam_alpha[small]))
        if np.any(~small):
            log_t[~small] = _double_rejection(rng, alpha, lam_alpha[~small])
        values = np.exp(log_scale + log_t)
    return _as_output(values.reshape(shape), scalar)


def sample_gg_increment(rng: RngStream, eta_t: ArrayLike, sigma: float, c: float, size: Size = None):
    """
    Exact draw from the generalised gamma law GG(eta_t, sigma, c).

    sigma = 0 is Gamma(eta_t, c); sigma < 0 is compound Poisson with
    Poisson(eta_t c**sigma / -sigma) Gamma(-sigma, c) jumps; 0 < sigma < 1
    is exponentially tilted stable.
    """
    _require_positive("eta_t", eta_t)
    _require_positive("c", c)
    if not sigma < 1.0:
        raise DomainError(f"sigma must be < 1, got {sigma}")
    scalar = _is_scalar_call(size, eta_t)
    shape = size if size is not None else np.shape(eta_t)
    eta_t = np.broadcast_to(np.asarray(eta_t, dtype=float), shape)

    if sigma == 0.0:
        values = sample_gamma(rng, eta_t, c, size=shape)
    elif sigma < 0.0:
        counts = sample_poisson(rng, eta_t * c**sigma / -sigma, size=shape)
        values = np.zeros(shape)
        hit = counts > 0
        if np.any(hit):
            values[hit] = sample_gamma(rng, -sigma * counts[hit], c, size=int(hit.sum()))
    else:
        values = sample_tilted_stable(rng, TiltedStableParams(mass=eta_t, sigma=sigma, tilt=c), size=shape)
    return _as_output(np.asarray(values, dtype=float), scalar)
