import math

import numpy as np
import pytest
from scipy import stats

from conftest import z_score
from ggplevy.core.ggp import GgpParams, cumulant
from ggplevy.errors import DimensionError, DomainError
from ggplevy.models.sv import (
    OuState,
    ReturnSeries,
    SvKind,
    SvModelSpec,
    observation_logdensity,
    propagate_ou,
    sample_exp_levy_volatilities,
    sample_ou_noise,
    sample_ou_stationary,
    simulate_ou_path,
    simulate_returns,
    with_kind,
)


@pytest.fixture
def ou_gamma():
    return SvModelSpec.build("ou_gamma", {"eta": 2.0, "c": 1.0, "lam": 0.5})


@pytest.fixture
def ou_ggp():
    return SvModelSpec.build("ou_ggp", {"eta": 2.0, "tau": 3.0, "c": 1.0, "lam": 0.5})


def test_spec_build_and_free_params():
    spec = SvModelSpec.build("exp_levy", {"eta": 1.0, "sigma": 0.6, "tau": 3.0, "c": 2.0})
    assert spec.kind is SvKind.EXP_LEVY
    assert spec.lam is None
    assert spec.free_params() == {"eta": 1.0, "sigma": 0.6, "tau": 3.0, "c": 2.0}

    # parameters a kind does not use are dropped
    gamma = SvModelSpec.build("exp_gamma", {"eta": 1.0, "sigma": 0.6, "tau": 3.0, "c": 2.0})
    assert gamma.marginal.sigma == 0.0
    assert gamma.free_params() == {"eta": 1.0, "c": 2.0}

    ou = SvModelSpec.build("ou_ggp", {"eta": 1.0, "tau": 2.5, "c": 1.0, "lam": 0.1})
    assert list(ou.free_params()) == ["eta", "tau", "c", "lam"]
    assert ou.with_params({"eta": 3.0, "tau": 2.5, "c": 1.0, "lam": 0.2}).lam == 0.2


def test_spec_validation():
    with pytest.raises(DomainError):
        SvModelSpec.build("ou_gamma", {"eta": 1.0, "c": 1.0})
    with pytest.raises(DomainError):
        SvModelSpec.build("ou_gamma", {"eta": 1.0, "c": 1.0, "lam": -1.0})
    with pytest.raises(DomainError):
        SvModelSpec(kind=SvKind.OU_GGP, marginal=GgpParams(1.0, 0.3, 2.0, 1.0), lam=1.0)
    with pytest.raises(DomainError):
        SvModelSpec.build("exp_levy", {"eta": 1.0, "sigma": 0.5, "tau": 2.0, "c": 1.0}, mu0=math.nan)
    with pytest.raises(ValueError):
        SvModelSpec.build("garch", {"eta": 1.0, "c": 1.0})


def test_with_kind_gives_gamma_baseline():
    spec = SvModelSpec.build("exp_levy", {"eta": 1.5, "sigma": 0.4, "tau": 3.0, "c": 2.0}, mu0=0.1)
    baseline = with_kind(spec, "exp_gamma")
    assert baseline.kind is SvKind.EXP_GAMMA
    assert baseline.marginal.eta == 1.5 and baseline.marginal.c == 2.0
    assert baseline.mu0 == 0.1
    ou = with_kind(spec, SvKind.OU_GAMMA, lam=0.3)
    assert ou.lam == 0.3


def test_return_series_validation():
    series = ReturnSeries(y=[0.1, -0.2, 0.05], delta=[1.0, 1.0, 2.0])
    assert len(series) == 3
    assert len(series.slice(1)) == 2
    with pytest.raises(DimensionError):
        ReturnSeries(y=[0.1, 0.2], delta=[1.0])
    with pytest.raises(DomainError):
        ReturnSeries(y=[0.1], delta=[0.0])
    with pytest.raises(DomainError):
        ReturnSeries(y=[math.inf], delta=[1.0])


def test_observation_logdensity():
    plain = SvModelSpec.build("exp_gamma", {"eta": 1.0, "c": 1.0})
    assert observation_logdensity(plain, 0.0, 1.0, 1.0) == pytest.approx(-0.5 * math.log(2.0 * math.pi))

    drift = SvModelSpec.build("exp_gamma", {"eta": 1.0, "c": 1.0}, mu0=0.1, mu1=-0.5)
    expected = stats.norm.logpdf(0.3, loc=0.1 * 2.0 - 0.5 * 0.4, scale=math.sqrt(0.4))
    assert observation_logdensity(drift, 0.3, 2.0, 0.4) == pytest.approx(expected, rel=1e-13)

    vbar = np.array([0.5, 1.0, 2.0])
    values = observation_logdensity(plain, 0.2, 1.0, vbar)
    np.testing.assert_allclose(values, stats.norm.logpdf(0.2, scale=np.sqrt(vbar)))


def test_observation_logdensity_zero_volatility():
    """A zero integrated volatility is a point mass at the mean"""
    spec = SvModelSpec.build("exp_gamma", {"eta": 1.0, "c": 1.0}, mu0=0.5)
    assert observation_logdensity(spec, 0.5, 1.0, 0.0) == 0.0
    assert observation_logdensity(spec, 0.4, 1.0, 0.0) == -math.inf
    with pytest.raises(DomainError):
        observation_logdensity(spec, 0.0, 1.0, -1e-3)


def test_exp_levy_volatility_shapes_and_mean(rng):
    spec = SvModelSpec.build("exp_gamma", {"eta": 2.0, "c": 4.0})
    delta = np.array([0.5, 1.0, 2.0])
    single = sample_exp_levy_volatilities(rng, spec, delta)
    assert single.shape == (3,)
    paths = sample_exp_levy_volatilities(rng, spec, delta, n_paths=50_000)
    assert paths.shape == (50_000, 3)
    # Gamma(eta Delta, c)
    for j, d in enumerate(delta):
        assert abs(z_score(paths[:, j], 2.0 * d / 4.0, 2.0 * d / 16.0)) < 5.0

    ggp = SvModelSpec.build("exp_levy", {"eta": 1.0, "sigma": 0.5, "tau": 3.0, "c": 1.0})
    draws = sample_exp_levy_volatilities(rng, ggp, np.ones(100_000))
    assert abs(z_score(draws, cumulant(ggp.marginal, 1.0, 1), cumulant(ggp.marginal, 1.0, 2))) < 5.0


def test_kind_mismatch(rng, ou_gamma):
    exp_spec = SvModelSpec.build("exp_gamma", {"eta": 1.0, "c": 1.0})
    with pytest.raises(DomainError):
        sample_ou_noise(rng, exp_spec, 1.0)
    with pytest.raises(DomainError):
        sample_exp_levy_volatilities(rng, ou_gamma, [1.0])
    with pytest.raises(DomainError):
        sample_ou_noise(rng, ou_gamma, 0.0)


def test_ou_noise_ordering(rng, ou_ggp):
    eps_v, eps_z = sample_ou_noise(rng, ou_ggp, 2.0, size=20_000)
    assert np.all(eps_v >= 0.0)
    assert np.all(eps_v <= eps_z)
    single = sample_ou_noise(rng, ou_ggp, 1.0)
    assert isinstance(single[0], float) and isinstance(single[1], float)


def test_ou_noise_moments(rng, ou_gamma):
    """E eps_z = eta lam Delta / c and E eps_v = eta (1 - exp(-lam Delta)) / c"""
    delta = 1.0
    eps_v, eps_z = sample_ou_noise(rng, ou_gamma, delta, size=100_000)
    # compound Poisson variance: rate * E[W^2] = eta lam Delta * 2 / c^2
    assert abs(z_score(eps_z, 2.0 * 0.5 * delta, 2.0 * 0.5 * delta * 2.0)) < 5.0
    mean_v = 2.0 * -math.expm1(-0.5 * delta)
    assert abs(z_score(eps_v, mean_v, 2.0)) < 5.0


@pytest.mark.parametrize("kind", ["ou_gamma", "ou_ggp"])
def test_ou_step_preserves_stationary_law(rng, kind, ou_gamma, ou_ggp):
    """V_0 ~ F propagated one step is again distributed as F"""
    spec = ou_gamma if kind == "ou_gamma" else ou_ggp
    n = 100_000
    v0 = np.asarray(sample_ou_stationary(rng, spec, size=n))
    state = OuState(v=v0, z=np.zeros(n), vbar=np.zeros(n))
    stepped = propagate_ou(rng, spec, state, 1.5)
    if spec.kind is SvKind.OU_GAMMA:
        mean, var = 2.0, 2.0
    else:
        mean, var = cumulant(spec.marginal, 1.0, 1), cumulant(spec.marginal, 1.0, 2)
    assert abs(z_score(v0, mean, var)) < 5.0
    assert abs(z_score(stepped.v, mean, var)) < 5.0
    assert np.all(stepped.vbar >= 0.0)
    np.testing.assert_array_equal(stepped.z >= 0.0, True)


def test_ou_path_identities(rng, ou_ggp):
    """V_k = e^(-lam Delta) V_(k-1) + eps_v and lam sum Vbar = Z_n - V_n + V_0"""
    delta = np.full(500, 0.7)
    path = simulate_ou_path(rng, ou_ggp, delta, v0=1.2)
    assert len(path) == 500
    assert path.v0 == 1.2
    decay = math.exp(-ou_ggp.lam * 0.7)
    np.testing.assert_allclose(path.v[0], decay * 1.2 + path.eps_v[0])
    np.testing.assert_allclose(path.v[1:], decay * path.v[:-1] + path.eps_v[1:], rtol=1e-12)
    np.testing.assert_allclose(path.z, np.cumsum(path.eps_z))
    lhs = ou_ggp.lam * path.vbar.sum()
    assert lhs == pytest.approx(path.z[-1] - path.v[-1] + path.v0, rel=1e-9)
    assert np.all(path.vbar >= 0.0)
    assert len(path.states()) == 500


def test_simulation_is_reproducible(ou_gamma):
    from ggplevy.core.rng import RngStream

    a, va = simulate_returns(RngStream(5, 1000), ou_gamma, np.ones(200))
    b, vb = simulate_returns(RngStream(5, 1000), ou_gamma, np.ones(200))
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(va, vb)


def test_simulated_returns_are_normal_given_volatility(rng):
    spec = SvModelSpec.build("exp_gamma", {"eta": 3.0, "c": 1.0}, mu0=0.2, mu1=-0.1)
    series, vbar = simulate_returns(rng, spec, np.ones(20_000))
    assert len(series) == 20_000
    standardized = (series.y - 0.2 - (-0.1) * vbar) / np.sqrt(vbar)
    assert abs(np.mean(standardized)) < 0.05
    assert np.std(standardized) == pytest.approx(1.0, abs=0.03)
