import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from ..core.ggp import (
    GbfryParams,
    GgpParams,
    background_intensity,
    cumulant,
    gbfry_pdf,
    laplace_exponent,
    levy_intensity,
    sample_ggp_increment,
    sample_nggp_increment,
)
from ..core.rng import RngStream
from ..core.special import gamma_recurrence_residual, quad_checked
from ..inference.estimators import estimate_loglik_exp_levy, estimate_loglik_ou_smc
from ..models.sv import SvModelSpec, sample_ou_noise, simulate_returns
from .metrics import LossKind, LossSpec, bayes_estimate, ks_statistic

logger = logging.getLogger(__name__)

SELFTEST_STREAM_BASE = 3000

# (rng) -> (passed, details)
CheckFn = Callable[[RngStream], Tuple[bool, Dict[str, Any]]]


@dataclass
class CheckResult:
    """Result of a single invariant check"""
    task_id: str
    success: bool
    execution_time: float
    output: Dict[str, Any]
    error: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)


@dataclass
class CheckTask:
    """An invariant check with its own random stream"""
    id: str
    description: str
    check: CheckFn
    metadata: Dict[str, Any] = field(default_factory=dict)


@dataclass
class CheckSuite:
    """Collection of invariant checks"""
    name: str
    description: str
    tasks: List[CheckTask] = field(default_factory=list)

    def add_task(self, task: CheckTask):
        self.tasks.append(task)


class SelfTestRunner:
    """Runs check suites and writes a JSON report"""

    def __init__(self, output_dir: str = "./ggp_output", seed: int = 0):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.seed = seed

    def run_single_task(self, task: CheckTask, index: int) -> CheckResult:
        start_time = time.time()
        rng = RngStream(self.seed, stream_id=SELFTEST_STREAM_BASE + index)
        try:
            passed, output = task.check(rng)
            error = None
        except Exception as e:
            logger.warning(f"Check {task.id} raised: {e}")
            passed, output, error = False, {}, f"{type(e).__name__}: {e}"
        return CheckResult(
            task_id=task.id,
            success=bool(passed),
            execution_time=time.time() - start_time,
            output=output,
            error=error,
            metadata={"task_description": task.description},
        )

    def run_suite(self, suite: CheckSuite) -> Dict[str, Any]:
        logger.info(f"Running check suite: {suite.name}")
        results = []
        total_tasks = len(suite.tasks)
        for i, task in enumerate(suite.tasks):
            logger.info(f"Running check {i + 1}/{total_tasks}: {task.id}")
            result = self.run_single_task(task, i)
            if not result.success:
                logger.warning(f"Check {task.id} failed: {result.error or result.output}")
            results.append(result)

        passed = sum(1 for r in results if r.success)
        total_time = sum(r.execution_time for r in results)
        suite_result = {
            "suite_name": suite.name,
            "suite_description": suite.description,
            "seed": self.seed,
            "total_tasks": total_tasks,
            "successful_tasks": passed,
            "success_rate": passed / total_tasks if total_tasks > 0 else 0,
            "all_passed": passed == total_tasks,
            "total_execution_time": total_time,
            "results": [self._result_to_dict(r) for r in results],
        }
        self._save_results(suite_result)
        return suite_result

    def _result_to_dict(self, result: CheckResult) -> Dict[str, Any]:
        return {
            "task_id": result.task_id,
            "success": result.success,
            "execution_time": result.execution_time,
            "output": result.output,
            "error": result.error,
            "metadata": result.metadata,
        }

    def _save_results(self, results: Dict[str, Any]):
        filepath = self.output_dir / f"selftest_{results['suite_name']}.json"
        with open(filepath, 'w') as f:
            json.dump(results, f, indent=2, default=float)
        logger.info(f"Saved self-test report to {filepath}")


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def _check_gamma_recurrence(rng: RngStream):
    grid = [(s, x) for s in (0.3, 1.0, 2.5, 7.0) for x in (0.1, 1.0, 5.0, 30.0)]
    worst = max(abs(gamma_recurrence_residual(s, x)) / max(1.0, s * math.gamma(s)) for s, x in grid)
    return worst <= 1e-11, {"max_residual": worst}


def _check_gbfry_normalisation(rng: RngStream):
    g = GbfryParams(kappa=1.5, tau=2.0, c=1.0)
    total = quad_checked(lambda v: gbfry_pdf(g, math.exp(v)) * math.exp(v), -60.0, 60.0, rel_tol=1e-11).value
    return abs(total - 1.0) <= 1e-8, {"integral": total}


def _check_laplace_exponent(rng: RngStream):
    p = GgpParams(eta=1.0, sigma=0.5, tau=2.0, c=1.0)
    theta = 1.0
    direct = quad_checked(
        lambda v: -math.expm1(-theta * math.exp(v)) * levy_intensity(p, math.exp(v)) * math.exp(v),
        -60.0, 40.0, rel_tol=1e-11,
    ).value
    psi = laplace_exponent(p, theta)
    rel = abs(psi - direct) / direct
    return rel <= 1e-6, {"psi": psi, "quadrature": direct, "relative_error": rel}


def _check_increment_mean(rng: RngStream):
    p = GgpParams(eta=1.0, sigma=0.5, tau=3.0, c=1.0)
    draws = sample_ggp_increment(rng, p, 1.0, size=100_000).value
    se = math.sqrt(cumulant(p, 1.0, 2) / draws.size)
    z = (np.mean(draws) - cumulant(p, 1.0, 1)) / se
    return abs(z) <= 5.0, {"mean": float(np.mean(draws)), "z_score": float(z)}


def _check_ou_noise_order(rng: RngStream):
    spec = SvModelSpec.build("ou_ggp", {"eta": 5.0, "tau": 2.0, "c": 1.0, "lam": 0.5})
    eps_v, eps_z = sample_ou_noise(rng, spec, 1.0, size=10_000)
    return bool(np.all(eps_v <= eps_z)) and bool(np.all(eps_v >= 0.0)), {"max_eps_z": float(eps_z.max())}


def _check_estimators_finite(rng: RngStream):
    exp_spec = SvModelSpec.build("exp_levy", {"eta": 1.0, "sigma": 0.6, "tau": 3.0, "c": 1.0})
    ou_spec = SvModelSpec.build("ou_gamma", {"eta": 2.0, "c": 1.0, "lam": 0.1})
    exp_data, _ = simulate_returns(rng, exp_spec, np.ones(50))
    ou_data, _ = simulate_returns(rng, ou_spec, np.ones(50))
    ll_exp = estimate_loglik_exp_levy(rng, exp_spec, exp_data, 200).loglik
    ll_ou = estimate_loglik_ou_smc(rng, ou_spec, ou_data, 200).loglik
    return math.isfinite(ll_exp) and math.isfinite(ll_ou), {"exp_levy": ll_exp, "ou_smc": ll_ou}


def _check_metrics(rng: RngStream):
    x = np.asarray(rng.standard_normal(500))
    ks_same = ks_statistic(x, x)
    q = bayes_estimate(np.arange(1, 101), LossSpec(LossKind.L1_ALPHA, 0.95))
    return ks_same == 0.0 and q == 95.0, {"ks_identical": ks_same, "quantile_95": q}


def _check_background_integral(rng: RngStream):
    p = GgpParams(eta=1.0, sigma=0.0, tau=2.0, c=1.0)
    total = quad_checked(lambda v: background_intensity(p, math.exp(v)) * math.exp(v), -60.0, 40.0,
                         rel_tol=1e-11).value
    return abs(total - p.eta) <= 1e-6 * p.eta, {"integral": total}


def _check_stable_special_case(rng: RngStream):
    p = GgpParams(eta=1.0, sigma=0.5, tau=0.5, c=1.0)
    w = np.logspace(-3.0, 2.0, 50)
    stable = p.eta / math.gamma(1.0 - p.sigma) * w ** (-1.0 - p.sigma)
    worst = float(np.max(np.abs(levy_intensity(p, w) / stable - 1.0)))
    return worst <= 1e-12, {"max_relative_error": worst}


def _check_jump_density_decreasing(rng: RngStream):
    p = GgpParams(eta=1.0, sigma=0.5, tau=2.0, c=1.0)
    w = np.logspace(-6.0, 3.0, 10_000)
    k = w * levy_intensity(p, w)
    increases = int(np.sum(k[1:] > k[:-1]))
    return increases == 0, {"increases": increases}


def _check_nggp_symmetry(rng: RngStream):
    x = sample_nggp_increment(rng, GgpParams(eta=1.0, sigma=0.5, tau=3.0, c=1.0), 1.0, size=100_000)
    ks = ks_statistic(x, -x)
    return ks < 0.01, {"ks": ks}


def create_invariant_suite() -> CheckSuite:
    """Fast checks of the numerical identities every command relies on"""
    suite = CheckSuite(name="invariants", description="Special functions, samplers, estimators and metrics")
    suite.add_task(CheckTask("gamma_recurrence", "s gamma(s,x) - gamma(s+1,x) = x^s e^-x", _check_gamma_recurrence))
    suite.add_task(CheckTask("gbfry_normalisation", "GBFRY density integrates to one", _check_gbfry_normalisation))
    suite.add_task(CheckTask("laplace_exponent", "Laplace exponent against direct quadrature",
                             _check_laplace_exponent))
    suite.add_task(CheckTask("increment_mean", "GGP increment mean against the first cumulant",
                             _check_increment_mean))
    suite.add_task(CheckTask("ou_noise_order", "OU noise satisfies 0 <= eps_v <= eps_z", _check_ou_noise_order))
    suite.add_task(CheckTask("estimators_finite", "Both likelihood estimators are finite on simulated data",
                             _check_estimators_finite))
    suite.add_task(CheckTask("background_integral", "Background intensity integrates to eta at sigma = 0",
                             _check_background_integral))
    suite.add_task(CheckTask("stable_special_case", "sigma = tau, c = 1 gives the stable intensity",
                             _check_stable_special_case))
    suite.add_task(CheckTask("jump_density_decreasing", "w rho(w) is non-increasing for sigma >= 0",
                             _check_jump_density_decreasing))
    suite.add_task(CheckTask("nggp_symmetry", "NGGP increments are symmetric", _check_nggp_symmetry))
    suite.add_task(CheckTask("metrics", "KS and quantile conventions", _check_metrics))
    return suite
