"""
Return-series CSV files.

Two input shapes are accepted, told apart by the header:

* ``timestamp,price``: returns are log(S_k / S_{k-1}) and Delta_k the
  timestamp differences divided by ``time_unit``. Timestamps are numbers
  or ISO dates (differences then count seconds).
* ``delta,log_return``: used as given.
"""

import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..errors import DataError, DomainError
from ..models.sv import ReturnSeries

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
PRICE_COLUMNS = ("timestamp", "price")
RETURN_COLUMNS = ("delta", "log_return")


def _line(row: int) -> int:
    # header is line 1
    return int(row) + 2


def _numeric(frame: pd.DataFrame, column: str, path: str) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        row = int(np.argmax(bad.to_numpy()))
        raise DataError(f"column {column!r} has non-numeric value {frame[column].iloc[row]!r}",
                        path=path, line=_line(row))
    # float() on the text is correctly rounded, so written values read back exactly
    return frame[column].astype(float).to_numpy()


def _timestamps(frame: pd.DataFrame, path: str) -> np.ndarray:
    numeric = pd.to_numeric(frame["timestamp"], errors="coerce")
    if not numeric.isna().any():
        return numeric.to_numpy(dtype=float)
    parsed = pd.to_datetime(frame["timestamp"], errors="coerce")
    if parsed.isna().any():
        row = int(np.argmax(parsed.isna().to_numpy()))
        raise DataError(f"unreadable timestamp {frame['timestamp'].iloc[row]!r}", path=path, line=_line(row))
    return ((parsed - parsed.iloc[0]).dt.total_seconds()).to_numpy(dtype=float)


def _from_prices(frame: pd.DataFrame, path: str, time_unit: float) -> ReturnSeries:
    if len(frame) < 2:
        raise DataError("need at least two prices", path=path)
    prices = _numeric(frame, "price", path)
    if np.any(prices <= 0.0):
        row = int(np.argmax(prices <= 0.0))
        raise DataError(f"price must be positive, got {prices[row]}", path=path, line=_line(row))
    stamps = _timestamps(frame, path)
    gaps = np.diff(stamps)
    if np.any(gaps <= 0.0):
        row = int(np.argmax(gaps <= 0.0)) + 1
        raise DataError("timestamps must be strictly increasing", path=path, line=_line(row))
    return ReturnSeries(y=np.diff(np.log(prices)), delta=gaps / time_unit)


def _from_returns(frame: pd.DataFrame, path: str) -> ReturnSeries:
    delta = _numeric(frame, "delta", path)
    y = _numeric(frame, "log_return", path)
    if np.any(delta <= 0.0):
        row = int(np.argmax(delta <= 0.0))
        raise DataError(f"delta must be positive, got {delta[row]}", path=path, line=_line(row))
    return ReturnSeries(y=y, delta=delta)


def load_return_series(path: str, shape: str = "auto", time_unit: float = 1.0) -> ReturnSeries:
    """Read a return series from CSV (see module docstring for the layouts)"""
    path = str(path)
    if not Path(path).exists():
        raise DataError("file not found", path=path)
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise DataError("file is empty", path=path) from e
    except pd.errors.ParserError as e:
        raise DataError(f"malformed CSV: {e}", path=path) from e
    if frame.empty:
        raise DataError("file has a header but no rows", path=path)

    columns = set(frame.columns.str.strip())
    frame.columns = frame.columns.str.strip()
    is_prices = set(PRICE_COLUMNS) <= columns
    is_returns = set(RETURN_COLUMNS) <= columns
    if shape == "prices" or (shape == "auto" and is_prices):
        if not is_prices:
            raise DataError(f"expected columns {PRICE_COLUMNS}", path=path, line=1)
        series = _from_prices(frame, path, time_unit)
    elif shape == "returns" or (shape == "auto" and is_returns):
        if not is_returns:
            raise DataError(f"expected columns {RETURN_COLUMNS}", path=path, line=1)
        series = _from_returns(frame, path)
    else:
        raise DataError(f"header must contain {PRICE_COLUMNS} or {RETURN_COLUMNS}", path=path, line=1)

    logger.info(f"Loaded {len(series)} returns from {path}")
    return series


def write_return_series(path: str, series: ReturnSeries, vbar: Optional[np.ndarray] = None):
    """Write delta,log_return[,vbar] with round-trip float formatting"""
    frame = pd.DataFrame({"delta": series.delta, "log_return": series.y})
    if vbar is not None:
        vbar = np.asarray(vbar, dtype=float)
        if vbar.size != len(series):
            raise DomainError(f"vbar has {vbar.size} entries for {len(series)} returns")
        frame["vbar"] = vbar
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(series)} returns to {path}")


def load_latent_series(path: str) -> np.ndarray:
    """The vbar column written next to simulated returns"""
    frame = pd.read_csv(path, float_precision="round_trip")
    if "vbar" not in frame.columns:
        raise DataError("no vbar column", path=str(path), line=1)
    return frame["vbar"].to_numpy(dtype=float)
