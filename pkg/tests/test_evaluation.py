import json
import tempfile
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from ggplevy.errors import DimensionError, DomainError
from ggplevy.eval.harness import CheckSuite, CheckTask, SelfTestRunner, create_invariant_suite
from ggplevy.eval.metrics import (
    LossKind,
    LossSpec,
    average_loss,
    bayes_estimate,
    ks_statistic,
    l1_alpha_loss,
    zeta_coverage,
)
from ggplevy.eval.predictive import PredictiveSample, ranked_squared_return_bands


def test_ks_statistic():
    x = np.linspace(0.0, 1.0, 11)
    assert ks_statistic(x, x) == 0.0
    assert ks_statistic([0.0, 0.1], [5.0, 6.0]) == 1.0
    # one-sample: a single point at the median of U(0, 1) is 0.5 away
    assert ks_statistic([0.5], stats.uniform.cdf) == pytest.approx(0.5)
    with pytest.raises(DimensionError):
        ks_statistic([], [1.0])


def test_l1_alpha_loss_examples():
    assert l1_alpha_loss(2.0, 1.0, 0.95) == pytest.approx(1.0)
    assert l1_alpha_loss(1.0, 2.0, 0.95) == pytest.approx(0.05 / 0.95)
    np.testing.assert_allclose(l1_alpha_loss([3.0, 0.0], [1.0, 1.0], 0.5), [2.0, 1.0])


def test_bayes_estimates():
    draws = np.arange(1, 101)
    # lower empirical quantile: smallest value whose ECDF reaches alpha
    assert bayes_estimate(draws, LossSpec(LossKind.L1_ALPHA, 0.95)) == 95.0
    assert bayes_estimate(draws, LossSpec(LossKind.L2)) == pytest.approx(50.5)

    matrix = np.column_stack([draws, 2 * draws])
    np.testing.assert_allclose(bayes_estimate(matrix, LossSpec(LossKind.L1_ALPHA, 0.5), axis=0), [50.0, 100.0])
    with pytest.raises(DimensionError):
        bayes_estimate([], LossSpec())


def test_loss_spec():
    assert LossSpec().label == "l2"
    assert LossSpec("l1_alpha", 0.95).label == "l1_0.95"
    with pytest.raises(DomainError):
        LossSpec(LossKind.L1_ALPHA)
    with pytest.raises(DomainError):
        LossSpec(LossKind.L1_ALPHA, 1.0)


def test_average_loss():
    truth = np.array([1.0, 2.0])
    assert average_loss(truth, [1.0, 4.0], LossSpec()) == pytest.approx(2.0)
    # errors of +1 and -1 under alpha = 0.95
    expected = 0.5 * (1.0 + 0.05 / 0.95)
    assert average_loss([2.0, 1.0], [1.0, 2.0], LossSpec(LossKind.L1_ALPHA, 0.95)) == pytest.approx(expected)
    with pytest.raises(DimensionError):
        average_loss(truth, [1.0], LossSpec())


def test_zeta_coverage():
    draws = np.tile(np.arange(100.0)[:, None], (1, 3))
    result = zeta_coverage([-1.0, 50.0, 99.0], draws)
    # ties count as covered
    np.testing.assert_allclose(result.zeta, [1.0, 0.5, 0.01])
    assert 0.0 <= result.ks_vs_uniform <= 1.0

    with pytest.raises(DimensionError):
        zeta_coverage([1.0, 2.0], draws)
    with pytest.raises(DimensionError):
        zeta_coverage([1.0], np.ones((99, 1)))


def test_zeta_is_uniform_for_calibrated_draws():
    rng = np.random.default_rng(0)
    truth = rng.gamma(2.0, size=2000)
    draws = rng.gamma(2.0, size=(400, 2000))
    result = zeta_coverage(truth, draws)
    assert result.ks_vs_uniform < 0.05


def test_predictive_sample_validation():
    with pytest.raises(DimensionError):
        PredictiveSample(np.ones((99, 4)))
    with pytest.raises(DimensionError):
        PredictiveSample(np.ones(200))
    bad = np.ones((100, 2))
    bad[3, 1] = np.nan
    with pytest.raises(DimensionError):
        PredictiveSample(bad)
    sample = PredictiveSample(np.ones((100, 4)))
    assert sample.horizon == 4
    assert sample.pooled().shape == (400,)


def test_ranked_squared_return_bands():
    rng = np.random.default_rng(1)
    predictive = PredictiveSample(rng.normal(size=(500, 50)))
    test_y = rng.normal(size=50)
    bands = ranked_squared_return_bands(predictive, test_y)
    np.testing.assert_array_equal(bands.rank, np.arange(1, 51))
    assert np.all(bands.lower <= bands.upper)
    assert np.all(np.diff(bands.observed) <= 0.0)
    np.testing.assert_allclose(bands.observed[0], np.max(test_y**2))
    assert bands.outside.dtype == bool
    assert list(bands.to_frame().columns) == ["rank", "lower", "upper", "observed"]

    with pytest.raises(DimensionError):
        ranked_squared_return_bands(predictive, test_y[:10])


def test_selftest_runner_reports_failures():
    suite = CheckSuite("demo", "Runner behaviour")
    suite.add_task(CheckTask("passes", "always passes", lambda rng: (True, {"draw": float(rng.random())})))
    suite.add_task(CheckTask("fails", "always fails", lambda rng: (False, {})))

    def explode(rng):
        raise RuntimeError("boom")

    suite.add_task(CheckTask("raises", "raises", explode))

    with tempfile.TemporaryDirectory() as temp_dir:
        runner = SelfTestRunner(output_dir=temp_dir, seed=3)
        results = runner.run_suite(suite)

        assert results["suite_name"] == "demo"
        assert results["total_tasks"] == 3
        assert results["successful_tasks"] == 1
        assert results["all_passed"] is False
        raised = results["results"][2]
        assert raised["error"].startswith("RuntimeError")

        saved = json.loads((Path(temp_dir) / "selftest_demo.json").read_text())
        assert saved["successful_tasks"] == 1

        # each check draws from its own stream, so reruns agree
        again = SelfTestRunner(output_dir=temp_dir, seed=3).run_suite(suite)
        assert again["results"][0]["output"] == results["results"][0]["output"]


def test_invariant_suite_contents():
    suite = create_invariant_suite()
    assert [t.id for t in suite.tasks] == [
        "gamma_recurrence",
        "gbfry_normalisation",
        "laplace_exponent",
        "increment_mean",
        "ou_noise_order",
        "estimators_finite",
        "background_integral",
        "stable_special_case",
        "jump_density_decreasing",
        "nggp_symmetry",
        "metrics",
    ]
