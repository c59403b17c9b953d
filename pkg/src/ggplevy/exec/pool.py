import logging
import platform
import resource
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import psutil
from tenacity import before_sleep_log, retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from ..core.rng import RngStream
from ..inference.estimators import LoglikEstimator
from ..inference.pmmh import McmcConfig, PosteriorTrace, run_pmmh
from ..inference.priors import PriorSpec
from ..models.sv import ReturnSeries, SvModelSpec

logger = logging.getLogger(__name__)


@dataclass
class ChainJob:
    """Everything a worker process needs to run one chain"""
    chain: int
    template: SvModelSpec
    prior: PriorSpec
    data: ReturnSeries
    cfg: McmcConfig


def _run_job(job: ChainJob) -> PosteriorTrace:
    rng = RngStream(job.cfg.seed, stream_id=job.chain)
    return run_pmmh(rng, job.template, job.prior, job.data, job.cfg, chain=job.chain)


def default_workers() -> int:
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


@retry(
    retry=retry_if_exception_type(BrokenProcessPool),
    stop=stop_after_attempt(2),
    wait=wait_exponential(multiplier=0.3, min=0.3, max=1.2),
    before_sleep=before_sleep_log(logger, logging.WARNING),
    reraise=True,
)
def _run_pool(jobs: List[ChainJob], n_workers: int) -> List[PosteriorTrace]:
    # every attempt rebuilds each chain from its own stream, so a retry is deterministic
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(_run_job, jobs))


def run_chains(
    template: SvModelSpec,
    prior: PriorSpec,
    data: ReturnSeries,
    cfg: McmcConfig,
    estimator: Optional[LoglikEstimator] = None,
    n_workers: Optional[int] = None,
) -> List[PosteriorTrace]:
    """
    Run cfg.n_chains independent PMMH chains, chain i on stream
    (cfg.seed, i). Results come back in chain order.

    A custom estimator (which may not pickle) or a single worker keeps
    everything in this process.
    """
    n_workers = min(cfg.n_chains, n_workers or default_workers())
    if estimator is not None or n_workers <= 1 or cfg.n_chains == 1:
        traces = []
        for chain in range(cfg.n_chains):
            rng = RngStream(cfg.seed, stream_id=chain)
            traces.append(run_pmmh(rng, template, prior, data, cfg, estimator=estimator, chain=chain))
        return traces

    jobs = [ChainJob(chain=i, template=template, prior=prior, data=data, cfg=cfg) for i in range(cfg.n_chains)]
    logger.info(f"Dispatching {cfg.n_chains} chains to {n_workers} worker processes")
    return _run_pool(jobs, n_workers)


def get_host_stats() -> Dict[str, Any]:
    """Host and resource figures recorded in run manifests"""
    try:
        usage = resource.getrusage(resource.RUSAGE_SELF)
        return {
            "platform": platform.system(),
            "python_version": platform.python_version(),
            "cpu_physical": psutil.cpu_count(logical=False),
            "cpu_logical": psutil.cpu_count(),
            "memory_total": psutil.virtual_memory().total,
            "memory_peak_kb": usage.ru_maxrss,
            "cpu_time_user": usage.ru_utime,
            "cpu_time_system": usage.ru_stime,
        }
    except Exception as e:
        return {"error": str(e)}
