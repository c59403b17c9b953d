import logging

import numpy as np
import pytest

from ggplevy.core.ggp import GgpParams
from ggplevy.core.rng import RngStream


@pytest.fixture
def rng():
    """A fresh random stream per test"""
    return RngStream(seed=20240601, stream_id=7)


@pytest.fixture
def ggp_params():
    """Infinite-activity GGP with finite second moment"""
    return GgpParams(eta=1.0, sigma=0.5, tau=3.0, c=1.0)


@pytest.fixture(autouse=True)
def quiet_logging():
    logging.getLogger("ggplevy").setLevel(logging.WARNING)
    yield


def z_score(sample: np.ndarray, mean: float, variance: float) -> float:
    """Standardised distance of a sample mean from its expectation"""
    return (float(np.mean(sample)) - mean) / np.sqrt(variance / sample.size)
