import math

import numpy as np
import pytest
from scipy import stats

from conftest import z_score
from ggplevy.core.ggp import (
    GbfryParams,
    GgpParams,
    background_intensity,
    cumulant,
    gbfry_cdf,
    gbfry_moment,
    gbfry_pdf,
    gbfry_quantile,
    ggp_tail_constant,
    laplace_exponent,
    levy_intensity,
    nggp_cumulant,
    nggp_excess_kurtosis,
    nggp_levy_tail,
    nggp_small_jump_constant,
    nggp_tail_constant,
    sample_gbfry,
    sample_ggp_increment,
    sample_nggp_increment,
    tail_intensity,
    tauberian_check,
)
from ggplevy.core.special import quad_checked
from ggplevy.errors import DomainError, MomentDivergenceError, RegimeError


def _laplace_by_quadrature(p: GgpParams, theta: float) -> float:
    def integrand(v):
        w = math.exp(v)
        return -math.expm1(-theta * w) * levy_intensity(p, w) * w
    return quad_checked(integrand, -60.0, 40.0, rel_tol=1e-11).value


def test_params_validation():
    with pytest.raises(DomainError):
        GgpParams(eta=0.0, sigma=0.5, tau=2.0, c=1.0)
    with pytest.raises(DomainError):
        GgpParams(eta=1.0, sigma=1.0, tau=2.0, c=1.0)
    with pytest.raises(DomainError):
        GgpParams(eta=1.0, sigma=0.5, tau=-1.0, c=1.0)
    with pytest.raises(DomainError):
        GgpParams(eta=1.0, sigma=0.5, tau=2.0, c=math.inf)

    # sigma within rounding of zero is the gamma-Pareto case
    p = GgpParams(eta=1.0, sigma=1e-12, tau=2.0, c=1.0)
    assert p.sigma == 0.0
    assert GgpParams(eta=1.0, sigma=-0.5, tau=2.0, c=1.0).finite_activity


def test_cumulants():
    p = GgpParams(eta=1.0, sigma=0.5, tau=3.0, c=1.0)
    # eta (tau - sigma) / (c (tau - 1))
    assert cumulant(p, 1.0, 1) == pytest.approx(1.25, rel=1e-14)
    # eta (tau - sigma) Gamma(2 - sigma) / (Gamma(1 - sigma) c^2 (tau - 2))
    assert cumulant(p, 1.0, 2) == pytest.approx(1.25, rel=1e-14)
    assert cumulant(p, 2.0, 1) == pytest.approx(2.5, rel=1e-14)

    gamma_pareto = GgpParams(eta=2.0, sigma=0.0, tau=4.0, c=0.5)
    # eta tau / (c (tau - 1)) at sigma = 0
    assert cumulant(gamma_pareto, 1.0, 1) == pytest.approx(2.0 * 4.0 / (0.5 * 3.0), rel=1e-14)


def test_cumulant_divergence():
    p = GgpParams(eta=1.0, sigma=0.5, tau=2.0, c=1.0)
    with pytest.raises(MomentDivergenceError):
        cumulant(p, 1.0, 2)
    with pytest.raises(DomainError):
        cumulant(p, 1.0, 0)
    with pytest.raises(DomainError):
        cumulant(p, 0.0, 1)


def test_nggp_cumulants(ggp_params):
    assert nggp_cumulant(ggp_params, 1.0, 1) == 0.0
    assert nggp_cumulant(ggp_params, 1.0, 3) == 0.0
    assert nggp_cumulant(ggp_params, 1.0, 2) == pytest.approx(cumulant(ggp_params, 1.0, 1))
    # (2j - 1)!! kappa_j(Z)
    assert nggp_cumulant(ggp_params, 1.0, 4) == pytest.approx(3.0 * cumulant(ggp_params, 1.0, 2))
    with pytest.raises(MomentDivergenceError):
        nggp_cumulant(ggp_params, 1.0, 6)
    assert nggp_excess_kurtosis(ggp_params, 2.0) == pytest.approx(3.0 * 2.5 / 2.5**2)


def test_tail_constants():
    """C = 0.375 and C1 = 2^tau Gamma(tau + 1/2) / sqrt(pi) C = 1.125 for (1, 0.5, 2, 1)"""
    p = GgpParams(eta=1.0, sigma=0.5, tau=2.0, c=1.0)
    assert ggp_tail_constant(p) == pytest.approx(0.375, rel=1e-13)
    assert nggp_tail_constant(p) == pytest.approx(1.125, rel=1e-13)


@pytest.mark.parametrize("sigma", [-0.5, 0.0, 0.5])
def test_laplace_exponent_against_quadrature(sigma):
    p = GgpParams(eta=1.3, sigma=sigma, tau=2.0, c=0.8)
    for theta in (0.1, 1.0, 25.0):
        assert laplace_exponent(p, theta) == pytest.approx(_laplace_by_quadrature(p, theta), rel=1e-7)


def test_laplace_exponent_properties(ggp_params):
    assert laplace_exponent(ggp_params, 0.0) == 0.0
    theta = np.array([0.5, 1.0, 2.0])
    psi = laplace_exponent(ggp_params, theta)
    assert psi.shape == (3,)
    assert np.all(np.diff(psi) > 0.0)
    # slope at the origin is the mean
    h = 1e-6
    assert laplace_exponent(ggp_params, h) / h == pytest.approx(cumulant(ggp_params, 1.0, 1), rel=1e-4)
    with pytest.raises(DomainError):
        laplace_exponent(ggp_params, -1.0)


@pytest.mark.parametrize("sigma", [-0.5, 0.0, 0.5])
def test_increment_laplace_transform(rng, sigma):
    """E exp(-theta Z_t) = exp(-t psi(theta))"""
    p = GgpParams(eta=1.0, sigma=sigma, tau=1.5, c=1.0)
    t, theta = 2.0, 1.0
    draws = sample_ggp_increment(rng, p, t, size=100_000).value
    expected = math.exp(-t * laplace_exponent(p, theta))
    assert abs(z_score(np.exp(-theta * draws), expected, 0.25)) < 5.0


def test_increment_mean(rng, ggp_params):
    draws = sample_ggp_increment(rng, ggp_params, 1.0, size=100_000).value
    assert abs(z_score(draws, cumulant(ggp_params, 1.0, 1), cumulant(ggp_params, 1.0, 2))) < 5.0


def test_increment_decomposition(rng, ggp_params):
    sample = sample_ggp_increment(rng, ggp_params, 0.5, size=1000)
    np.testing.assert_allclose(sample.value, sample.gg_part + sample.cp_part)
    assert np.all(sample.cp_part[sample.jump_count == 0] == 0.0)
    assert np.all(sample.value >= 0.0)

    finite = GgpParams(eta=1.0, sigma=-0.5, tau=2.0, c=1.0)
    sample = sample_ggp_increment(rng, finite, 0.5, size=1000)
    assert np.all(sample.gg_part == 0.0)


def test_increment_scalar_and_array_time(rng, ggp_params):
    single = sample_ggp_increment(rng, ggp_params, 1.0)
    assert isinstance(single.value, float)
    assert isinstance(single.jump_count, int)

    per_step = sample_ggp_increment(rng, ggp_params, np.array([0.5, 1.0, 2.0]))
    assert per_step.value.shape == (3,)
    with pytest.raises(DomainError):
        sample_ggp_increment(rng, ggp_params, 0.0)


def test_nggp_increment_variance(rng, ggp_params):
    """Var X_t = E Z_t"""
    x = sample_nggp_increment(rng, ggp_params, 1.0, size=100_000)
    assert abs(z_score(x, 0.0, cumulant(ggp_params, 1.0, 1))) < 5.0
    assert np.mean(x**2) == pytest.approx(cumulant(ggp_params, 1.0, 1), rel=0.05)


def test_gbfry_density_and_cdf():
    g = GbfryParams(kappa=1.5, tau=2.0, c=1.0)
    total = quad_checked(lambda v: gbfry_pdf(g, math.exp(v)) * math.exp(v), -60.0, 60.0, rel_tol=1e-11).value
    assert total == pytest.approx(1.0, abs=1e-8)

    x = np.array([0.1, 1.0, 3.0, 50.0])
    cdf = gbfry_cdf(g, x)
    assert np.all(np.diff(cdf) > 0.0)
    by_quad = quad_checked(lambda v: gbfry_pdf(g, math.exp(v)) * math.exp(v), -60.0, math.log(3.0),
                           rel_tol=1e-11).value
    assert cdf[2] == pytest.approx(by_quad, rel=1e-8)
    assert gbfry_cdf(g, 0.0) == 0.0
    assert gbfry_cdf(g, -1.0) == 0.0


def test_gbfry_moments_and_quantiles():
    g = GbfryParams(kappa=1.5, tau=3.0, c=2.0)
    # tau Gamma(1 + kappa) / (c (tau - 1) Gamma(kappa))
    assert gbfry_moment(g, 1.0) == pytest.approx(3.0 * 1.5 / (2.0 * 2.0), rel=1e-13)
    with pytest.raises(MomentDivergenceError):
        gbfry_moment(g, 3.0)
    for q in (0.01, 0.5, 0.99):
        assert gbfry_cdf(g, gbfry_quantile(g, q)) == pytest.approx(q, abs=1e-10)
    with pytest.raises(DomainError):
        gbfry_quantile(g, 1.0)


def test_gbfry_sampler_matches_cdf(rng):
    g = GbfryParams(kappa=0.7, tau=1.5, c=1.0)
    draws = sample_gbfry(rng, g, size=20_000)
    result = stats.kstest(draws, lambda x: gbfry_cdf(g, x))
    assert result.pvalue > 1e-3


def test_tail_intensity_power_law():
    p = GgpParams(eta=1.0, sigma=0.5, tau=2.0, c=1.0)
    x = 200.0
    assert tail_intensity(p, x) == pytest.approx(ggp_tail_constant(p) * x ** (-p.tau), rel=1e-6)
    values = tail_intensity(p, np.array([0.1, 1.0, 10.0]))
    assert np.all(np.diff(values) < 0.0)


def test_tail_intensity_small_jumps():
    """nu(x) ~ eta / (c^sigma sigma Gamma(1 - sigma)) x^-sigma as x -> 0"""
    p = GgpParams(eta=1.0, sigma=0.5, tau=2.0, c=1.0)
    x = 1e-8
    leading = p.eta / (p.c**p.sigma * p.sigma * math.gamma(1.0 - p.sigma)) * x ** (-p.sigma)
    assert tail_intensity(p, x) == pytest.approx(leading, rel=1e-2)


def test_background_intensity():
    p = GgpParams(eta=1.0, sigma=0.5, tau=2.0, c=1.0)
    w = np.array([0.01, 1.0, 10.0])
    assert np.all(background_intensity(p, w) > 0.0)
    with pytest.raises(RegimeError):
        background_intensity(GgpParams(eta=1.0, sigma=-0.5, tau=2.0, c=1.0), 1.0)


def test_nggp_tail_asymptotes():
    """Large jumps follow C1 x^(-2 tau); small jumps the Blumenthal-Getoor rate"""
    p = GgpParams(eta=1.0, sigma=0.5, tau=2.0, c=1.0)
    large = 100.0
    assert nggp_levy_tail(p, large) == pytest.approx(nggp_tail_constant(p) * large ** (-2.0 * p.tau), rel=1e-3)

    small = 1e-6
    leading = nggp_small_jump_constant(p, small) * small ** (-2.0 * p.bg_index)
    assert nggp_levy_tail(p, small) == pytest.approx(leading, rel=1e-2)

    pairs = tauberian_check(p, [0.5, 5.0])
    assert [x for x, _ in pairs] == [0.5, 5.0]
    assert pairs[0][1] > pairs[1][1] > 0.0
    with pytest.raises(DomainError):
        tauberian_check(p, [])


def test_background_intensity_integrates_to_eta():
    """For sigma = 0 the background process is compound Poisson with rate eta"""
    p = GgpParams(eta=1.0, sigma=0.0, tau=2.0, c=1.0)
    total = quad_checked(lambda v: background_intensity(p, math.exp(v)) * math.exp(v), -60.0, 40.0,
                         rel_tol=1e-11).value
    assert total == pytest.approx(p.eta, rel=1e-6)


@pytest.mark.parametrize("w", [0.1, 1.0, 10.0])
def test_background_intensity_finite_difference(w):
    p = GgpParams(eta=1.0, sigma=0.5, tau=2.0, c=1.0)
    h = 1e-5 * w
    derivative = (levy_intensity(p, w + h) - levy_intensity(p, w - h)) / (2.0 * h)
    expected = -levy_intensity(p, w) - w * derivative
    assert background_intensity(p, w) == pytest.approx(expected, rel=1e-6)


@pytest.mark.parametrize("sigma", [0.3, 0.7])
def test_stable_special_case(sigma):
    """sigma = tau, c = 1 gives the positive stable intensity"""
    p = GgpParams(eta=1.5, sigma=sigma, tau=sigma, c=1.0)
    w = np.logspace(-3.0, 2.0, 50)
    stable = p.eta / math.gamma(1.0 - sigma) * w ** (-1.0 - sigma)
    np.testing.assert_allclose(levy_intensity(p, w), stable, rtol=1e-12)


@pytest.mark.parametrize("sigma", [0.0, 0.5])
def test_jump_density_times_size_is_decreasing(sigma):
    p = GgpParams(eta=1.0, sigma=sigma, tau=2.0, c=1.0)
    w = np.logspace(-6.0, 3.0, 10_000)
    k = w * levy_intensity(p, w)
    assert np.all(k[:-1] >= k[1:])


def test_small_time_stable_limit(rng):
    """c Z_t / (eta t / sigma)^(1/sigma) tends to the law with Laplace transform exp(-s^sigma)"""
    p = GgpParams(eta=1.0, sigma=0.5, tau=3.0, c=1.0)
    t = 1e-4
    draws = sample_ggp_increment(rng, p, t, size=20_000).value
    scaled = p.c * draws / (p.eta * t / p.sigma) ** (1.0 / p.sigma)
    # stable(1/2) with exp(-sqrt(s)) is the Levy law with scale 1/2
    assert stats.kstest(scaled, stats.levy(scale=0.5).cdf).statistic < 0.03


def test_scale_equivariance(rng, ggp_params):
    scaled_params = GgpParams(eta=ggp_params.eta, sigma=ggp_params.sigma, tau=ggp_params.tau, c=2.0)
    scaled = scaled_params.c * sample_ggp_increment(rng, scaled_params, 1.0, size=100_000).value
    direct = sample_ggp_increment(rng, ggp_params, 1.0, size=100_000).value
    assert stats.ks_2samp(scaled, direct).statistic < 0.01


def test_time_scale_equivariance(rng):
    """eta and t enter the law only through their product"""
    stretched = sample_ggp_increment(rng, GgpParams(eta=2.0, sigma=0.5, tau=3.0, c=1.0), 1.0, size=100_000).value
    longer = sample_ggp_increment(rng, GgpParams(eta=1.0, sigma=0.5, tau=3.0, c=1.0), 2.0, size=100_000).value
    assert stats.ks_2samp(stretched, longer).statistic < 0.01


def test_nggp_symmetry(rng, ggp_params):
    x = sample_nggp_increment(rng, ggp_params, 1.0, size=100_000)
    assert stats.ks_2samp(x, -x).statistic < 0.01
