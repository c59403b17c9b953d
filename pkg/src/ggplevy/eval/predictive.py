"""Posterior predictive summaries: ranked squared-return bands."""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import DimensionError
from .metrics import MIN_POSTERIOR_ROWS, QUANTILE_METHOD

logger = logging.getLogger(__name__)

BAND_LEVELS = (0.025, 0.975)


@dataclass
class PredictiveSample:
    """Simulated returns (or volatilities), one row per posterior draw"""
    draws: np.ndarray

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        if draws.ndim != 2:
            raise DimensionError(f"predictive draws must be a matrix, got shape {draws.shape}")
        if draws.shape[0] < MIN_POSTERIOR_ROWS:
            raise DimensionError(f"need at least {MIN_POSTERIOR_ROWS} predictive rows, got {draws.shape[0]}")
        if not np.all(np.isfinite(draws)):
            raise DimensionError("predictive draws must be finite")
        self.draws = draws

    @property
    def horizon(self) -> int:
        return int(self.draws.shape[1])

    def pooled(self) -> np.ndarray:
        return self.draws.ravel()


@dataclass
class RankBands:
    """95% band of the r-th largest squared return with the observed curve"""
    rank: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    observed: np.ndarray

    @property
    def outside(self) -> np.ndarray:
        return (self.observed < self.lower) | (self.observed > self.upper)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "rank": self.rank,
            "lower": self.lower,
            "upper": self.upper,
            "observed": self.observed,
        })


def _ranked_squares(y: np.ndarray) -> np.ndarray:
    """Squared values sorted in decreasing order along the last axis"""
    return -np.sort(-(y**2), axis=-1)


def ranked_squared_return_bands(predictive: PredictiveSample, test_y) -> RankBands:
    y = np.asarray(test_y, dtype=float).ravel()
    if y.size != predictive.horizon:
        raise DimensionError(f"test series has {y.size} returns but predictive horizon is {predictive.horizon}")
    ranked = _ranked_squares(predictive.draws)
    lower, upper = np.quantile(ranked, BAND_LEVELS, axis=0, method=QUANTILE_METHOD)
    return RankBands(
        rank=np.arange(1, y.size + 1),
        lower=lower,
        upper=upper,
        observed=_ranked_squares(y),
    )
