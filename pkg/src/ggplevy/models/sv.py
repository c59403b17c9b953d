"""
Stochastic-volatility models driven by GGP subordinators.

Two families share one observation equation

    Y_k | Vbar_k ~ N(mu0 * Delta_k + mu1 * Vbar_k, Vbar_k)

and differ in how the integrated volatilities Vbar_k are generated:

* exponential-Levy (EXP_LEVY, EXP_GAMMA): Vbar_k are independent
  increments of a GGP (or gamma) subordinator over Delta_k;
* Ornstein-Uhlenbeck (OU_GAMMA, OU_GGP): Vbar_k integrates an OU process
  whose stationary law is Gamma(eta, c) or GGP(eta, 0, tau, c).

All parameters share the time unit of Delta (e.g. one trading day = 1.0).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..core.ggp import GgpParams, sample_ggp_increment
from ..core.rng import RngStream, sample_gamma, sample_normal, sample_pareto, sample_poisson
from ..errors import LOG_ZERO, DimensionError, DomainError, InvariantError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# tolerated negative rounding in Vbar relative to the state scale
VBAR_ROUNDING_TOL = 1e-12
_LOG_2PI = math.log(2.0 * math.pi)
# tau placeholder for kinds whose marginal ignores it
_UNUSED_TAU = 1.0


class SvKind(str, Enum):
    EXP_LEVY = "exp_levy"
    EXP_GAMMA = "exp_gamma"
    OU_GAMMA = "ou_gamma"
    OU_GGP = "ou_ggp"

    @property
    def is_ou(self) -> bool:
        return self in (SvKind.OU_GAMMA, SvKind.OU_GGP)

    @property
    def parameter_names(self) -> tuple:
        """Free parameters fitted by inference, in trace column order"""
        return _PARAMETER_NAMES[self]


_PARAMETER_NAMES = {
    SvKind.EXP_LEVY: ("eta", "sigma", "tau", "c"),
    SvKind.EXP_GAMMA: ("eta", "c"),
    SvKind.OU_GAMMA: ("eta", "c", "lam"),
    SvKind.OU_GGP: ("eta", "tau", "c", "lam"),
}


@dataclass(frozen=True)
class SvModelSpec:
    """
    A stochastic-volatility model.

    marginal carries (eta, sigma, tau, c). Gamma kinds only read eta and c;
    OU_GGP requires sigma == 0. lam is the OU rate and is ignored by the
    exponential-Levy kinds.
    """
    kind: SvKind
    marginal: GgpParams
    mu0: float = 0.0
    mu1: float = 0.0
    lam: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SvKind(self.kind))
        if not (math.isfinite(self.mu0) and math.isfinite(self.mu1)):
            raise DomainError(f"mu0 and mu1 must be finite, got {self.mu0}, {self.mu1}")
        if self.kind.is_ou:
            if self.lam is None or not (math.isfinite(self.lam) and self.lam > 0.0):
                raise DomainError(f"{self.kind.value} needs a positive OU rate lam, got {self.lam}")
        if self.kind is SvKind.OU_GGP and self.marginal.sigma != 0.0:
            raise DomainError(f"ou_ggp supports sigma = 0 only, got {self.marginal.sigma}")
        if self.kind in (SvKind.EXP_GAMMA, SvKind.OU_GAMMA) and self.marginal.sigma != 0.0:
            raise DomainError(f"{self.kind.value} has a gamma marginal, sigma must be 0")

    @classmethod
    def build(cls, kind: Union[SvKind, str], params: Dict[str, float],
              mu0: float = 0.0, mu1: float = 0.0) -> "SvModelSpec":
        """Create a spec from a flat parameter dict, filling parameters the kind ignores"""
        kind = SvKind(kind)
        marginal = GgpParams(
            eta=params["eta"],
            sigma=params.get("sigma", 0.0) if kind is SvKind.EXP_LEVY else 0.0,
            tau=params.get("tau", _UNUSED_TAU) if kind in (SvKind.EXP_LEVY, SvKind.OU_GGP) else _UNUSED_TAU,
            c=params["c"],
        )
        return cls(kind=kind, marginal=marginal, mu0=mu0, mu1=mu1,
                   lam=params.get("lam") if kind.is_ou else None)

    def with_params(self, params: Dict[str, float]) -> "SvModelSpec":
        """Same kind and drift terms, new free parameters"""
        return SvModelSpec.build(self.kind, params, mu0=self.mu0, mu1=self.mu1)

    def free_params(self) -> Dict[str, float]:
        values = dict(self.marginal.as_dict())
        values["lam"] = self.lam
        return {name: values[name] for name in self.kind.parameter_names}


@dataclass(frozen=True)
class ReturnSeries:
    """Log-returns y with inter-arrival times delta"""
    y: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        delta = np.asarray(self.delta, dtype=float).ravel()
        if y.shape != delta.shape:
            raise DimensionError(f"y has {y.size} entries but delta has {delta.size}")
        if not np.all(np.isfinite(y)):
            raise DomainError("returns must be finite")
        if not np.all(np.isfinite(delta) & (delta > 0.0)):
            raise DomainError("inter-arrival times must be positive and finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", delta)

    def __len__(self) -> int:
        return int(self.y.size)

    def slice(self, start: int, stop: Optional[int] = None) -> "ReturnSeries":
        return ReturnSeries(y=self.y[start:stop], delta=self.delta[start:stop])


@dataclass
class OuState:
    """
    OU state after one step. Fields are floats for a single trajectory or
    arrays holding one entry per particle.
    """
    v: ArrayLike
    z: ArrayLike
    vbar: ArrayLike


@dataclass
class OuPath:
    """A simulated OU trajectory stored column-wise, one entry per step"""
    v0: float
    v: np.ndarray
    z: np.ndarray
    vbar: np.ndarray
    eps_v: np.ndarray = field(repr=False, default=None)
    eps_z: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return int(self.v.size)

    def states(self) -> List[OuState]:
        return [OuState(v=float(v), z=float(z), vbar=float(b)) for v, z, b in zip(self.v, self.z, self.vbar)]


def _check_delta(delta: Sequence[float]) -> np.ndarray:
    arr = np.asarray(delta, dtype=float).ravel()
    if not np.all(np.isfinite(arr) & (arr > 0.0)):
        raise DomainError("inter-arrival times must be positive and finite")
    return arr


def _require_kind(spec: SvModelSpec, ou: bool):
    if spec.kind.is_ou != ou:
        family = "an OU" if ou else "an exponential-Levy"
        raise DomainError(f"{spec.kind.value} is not {family} model")


# ---------------------------------------------------------------------------
# Exponential-Levy volatilities
# ---------------------------------------------------------------------------

def sample_exp_levy_volatilities(rng: RngStream, spec: SvModelSpec, delta: Sequence[float],
                                 n_paths: Optional[int] = None) -> np.ndarray:
    """
    Independent integrated volatilities Vbar_k over each Delta_k.

    Returns shape (n,) or (n_paths, n) when n_paths is given.
    """
    _require_kind(spec, ou=False)
    d = _check_delta(delta)
    shape = d.shape if n_paths is None else (int(n_paths), d.size)
    t = np.broadcast_to(d, shape)
    m = spec.marginal
    if spec.kind is SvKind.EXP_GAMMA:
        return np.asarray(sample_gamma(rng, m.eta * t, m.c), dtype=float).reshape(shape)
    return np.asarray(sample_ggp_increment(rng, m, t).value, dtype=float).reshape(shape)


# ---------------------------------------------------------------------------
# OU dynamics
# ---------------------------------------------------------------------------

def _jump_sizes(rng: RngStream, spec: SvModelSpec, n: int) -> np.ndarray:
    m = spec.marginal
    sizes = rng.standard_exponential(n) / m.c
    if spec.kind is SvKind.OU_GGP:
        sizes = sizes * sample_pareto(rng, m.tau, 1.0, size=n)
    return sizes


def _ou_noise(rng: RngStream, spec: SvModelSpec, delta: np.ndarray):
    """Noise terms for a vector of step lengths, one entry per step"""
    counts = np.atleast_1d(sample_poisson(rng, spec.marginal.eta * spec.lam * delta))
    total = int(counts.sum())
    if total == 0:
        zeros = np.zeros(delta.size)
        return zeros, zeros.copy()
    owner = np.repeat(np.arange(delta.size), counts)
    sizes = _jump_sizes(rng, spec, total)
    # jump times theta ~ U(0, Delta) enter only through exp(lam (theta - Delta)) <= 1
    theta = rng.random(total) * delta[owner]
    decayed = np.exp(spec.lam * (theta - delta[owner])) * sizes
    eps_z = np.bincount(owner, weights=sizes, minlength=delta.size)
    eps_v = np.bincount(owner, weights=decayed, minlength=delta.size)
    return eps_v, eps_z


def sample_ou_noise(rng: RngStream, spec: SvModelSpec, delta_k: float, size: Optional[int] = None):
    """
    Exact draw of (eps_v, eps_z) over one step of length delta_k.

    N ~ Poisson(eta lam Delta) jumps W_j, each Exp(c) (times Pareto(tau, 1)
    for OU_GGP), arriving at uniform times theta_j; eps_z = sum W_j and
    eps_v = sum exp(lam (theta_j - Delta)) W_j, hence eps_v <= eps_z.
    With size, returns arrays of independent draws.
    """
    _require_kind(spec, ou=True)
    if not (math.isfinite(delta_k) and delta_k > 0.0):
        raise DomainError(f"delta_k must be positive, got {delta_k}")
    n = 1 if size is None else int(size)
    eps_v, eps_z = _ou_noise(rng, spec, np.full(n, float(delta_k)))
    if size is None:
        return float(eps_v[0]), float(eps_z[0])
    return eps_v, eps_z


def sample_ou_stationary(rng: RngStream, spec: SvModelSpec, size: Optional[int] = None):
    """Draws from the stationary marginal F of the instantaneous volatility"""
    _require_kind(spec, ou=True)
    m = spec.marginal
    if spec.kind is SvKind.OU_GAMMA:
        return sample_gamma(rng, m.eta, m.c, size=size)
    return sample_ggp_increment(rng, m, 1.0, size=size).value


def _integrated_volatility(spec: SvModelSpec, v_prev, z_new, eps_v, eps_z, delta):
    """vbar = (eps_z - eps_v + v_prev (1 - e^(-lam Delta))) / lam, clamped at 0"""
    raw = (eps_z - eps_v - v_prev * np.expm1(-spec.lam * delta)) / spec.lam
    floor = -VBAR_ROUNDING_TOL * np.maximum(z_new, v_prev)
    if np.any(raw < floor):
        raise InvariantError(f"integrated volatility {np.min(raw)} is negative beyond rounding")
    return np.maximum(raw, 0.0)


def propagate_ou(rng: RngStream, spec: SvModelSpec, state: OuState, delta_k: float) -> OuState:
    """One step of the OU recursion for every particle in state"""
    v_prev = np.asarray(state.v, dtype=float)
    z_prev = np.asarray(state.z, dtype=float)
    n = v_prev.size
    eps_v, eps_z = _ou_noise(rng, spec, np.full(n, float(delta_k)))
    eps_v = eps_v.reshape(v_prev.shape)
    eps_z = eps_z.reshape(v_prev.shape)
    v_new = math.exp(-spec.lam * delta_k) * v_prev + eps_v
    z_new = z_prev + eps_z
    vbar = _integrated_volatility(spec, v_prev, z_new, eps_v, eps_z, delta_k)
    return OuState(v=v_new, z=z_new, vbar=vbar)


def simulate_ou_path(rng: RngStream, spec: SvModelSpec, delta: Sequence[float],
                     v0: Optional[float] = None) -> OuPath:
    """
    Simulate V, Z and Vbar over the given steps starting from Z_0 = 0 and
    V_0 ~ F (or the supplied v0).
    """
    _require_kind(spec, ou=True)
    d = _check_delta(delta)
    if v0 is None:
        v0 = float(sample_ou_stationary(rng, spec))
    eps_v, eps_z = _ou_noise(rng, spec, d)
    decay = np.exp(-spec.lam * d)

    v = np.empty(d.size)
    prev = v0
    for k in range(d.size):
        prev = decay[k] * prev + eps_v[k]
        v[k] = prev
    v_prev = np.concatenate(([v0], v[:-1]))
    z = np.cumsum(eps_z)
    vbar = _integrated_volatility(spec, v_prev, z, eps_v, eps_z, d)
    logger.debug(f"Simulated {d.size} OU steps for {spec.kind.value}")
    return OuPath(v0=v0, v=v, z=z, vbar=vbar, eps_v=eps_v, eps_z=eps_z)


# ---------------------------------------------------------------------------
# Observation equation
# ---------------------------------------------------------------------------

def observation_logdensity(spec: SvModelSpec, y_k: ArrayLike, delta_k: ArrayLike, vbar_k: ArrayLike):
    """
    log N(y_k; mu0 Delta_k + mu1 Vbar_k, Vbar_k), broadcasting over arrays.

    Vbar_k = 0 is a point mass at the mean: log-density 0.0 when y_k equals
    it exactly and LOG_ZERO otherwise.
    """
    vbar = np.asarray(vbar_k, dtype=float)
    if np.any(~(vbar >= 0.0)):
        raise DomainError("integrated volatility must be non-negative")
    y = np.asarray(y_k, dtype=float)
    mean = spec.mu0 * np.asarray(delta_k, dtype=float) + spec.mu1 * vbar
    resid = y - mean
    positive = vbar > 0.0
    safe = np.where(positive, vbar, 1.0)
    with np.errstate(divide="ignore"):
        dens = -0.5 * (_LOG_2PI + np.log(safe)) - 0.5 * resid**2 / safe
    out = np.where(positive, dens, np.where(resid == 0.0, 0.0, LOG_ZERO))
    if out.ndim == 0:
        return float(out)
    return out


def simulate_returns(rng: RngStream, spec: SvModelSpec, delta: Sequence[float]):
    """Simulate (ReturnSeries, vbar) from the full generative model"""
    d = _check_delta(delta)
    if spec.kind.is_ou:
        vbar = simulate_ou_path(rng, spec, d).vbar
    else:
        vbar = sample_exp_levy_volatilities(rng, spec, d)
    noise = np.asarray(sample_normal(rng, d.size))
    y = spec.mu0 * d + spec.mu1 * vbar + np.sqrt(vbar) * noise
    return ReturnSeries(y=y, delta=d), vbar


def with_kind(spec: SvModelSpec, kind: Union[SvKind, str], **params) -> SvModelSpec:
    """Copy of spec as another kind, e.g. the variance-gamma baseline of a GGP model"""
    merged = {**spec.marginal.as_dict(), "lam": spec.lam, **params}
    return SvModelSpec.build(kind, merged, mu0=spec.mu0, mu1=spec.mu1)


__all__ = [
    "SvKind",
    "SvModelSpec",
    "ReturnSeries",
    "OuState",
    "OuPath",
    "sample_exp_levy_volatilities",
    "sample_ou_noise",
    "sample_ou_stationary",
    "propagate_ou",
    "simulate_ou_path",
    "observation_logdensity",
    "simulate_returns",
    "with_kind",
]
