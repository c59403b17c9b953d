"""
Result files written by the CLI: traces, latent draws, tables and the run
manifests. CSV floats use a round-trip format so identical runs produce
identical bytes; only the manifests' timing and host fields vary.
"""

import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
import pandas as pd
import scipy

from .. import __version__
from ..errors import DataError
from ..inference.pmmh import PosteriorTrace
from .series import FLOAT_FORMAT

logger = logging.getLogger(__name__)

_RESERVED = ("iteration", "loglik_hat", "accepted")
_TRACE_NAME = re.compile(r"trace_chain(\d+)\.csv$")


def trace_path(output_dir: str, chain: int) -> Path:
    return Path(output_dir) / f"trace_chain{chain}.csv"


def latent_path(output_dir: str, chain: int) -> Path:
    return Path(output_dir) / f"latent_chain{chain}.csv"


def write_table(path, frame: pd.DataFrame):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {path}")


def write_matrix(path, matrix: np.ndarray, row_label: str = "draw", row_ids: Optional[np.ndarray] = None):
    """A matrix with one row per draw and columns k0, k1, ... per time index"""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    frame = pd.DataFrame(matrix, columns=[f"k{j}" for j in range(matrix.shape[1])])
    frame.insert(0, row_label, np.arange(matrix.shape[0]) if row_ids is None else row_ids)
    write_table(path, frame)


def read_matrix(path) -> np.ndarray:
    frame = pd.read_csv(path, float_precision="round_trip")
    columns = [c for c in frame.columns if re.fullmatch(r"k\d+", c)]
    if not columns:
        raise DataError("no k<index> columns", path=str(path), line=1)
    return frame[columns].to_numpy(dtype=float)


def write_trace(output_dir: str, trace: PosteriorTrace) -> Path:
    """trace_chain{i}.csv plus latent_chain{i}.csv when latent draws were kept"""
    path = trace_path(output_dir, trace.chain)
    write_table(path, trace.to_frame())
    if trace.latent_vbar_draws is not None:
        write_matrix(latent_path(output_dir, trace.chain), trace.latent_vbar_draws,
                     row_label="iteration", row_ids=trace.latent_iterations)
    return path


def read_trace(path) -> PosteriorTrace:
    """Rebuild a PosteriorTrace (and its latent draws, if present) from write_trace output"""
    path = Path(path)
    if not path.exists():
        raise DataError("trace file not found", path=str(path))
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in _RESERVED if c not in frame.columns]
    if missing:
        raise DataError(f"trace is missing columns {missing}", path=str(path), line=1)
    names = tuple(c for c in frame.columns if c not in _RESERVED and not c.startswith("t_"))
    match = _TRACE_NAME.search(path.name)
    chain = int(match.group(1)) if match else 0

    latent = None
    latent_iters = np.empty(0, dtype=np.int64)
    latent_file = path.with_name(f"latent_chain{chain}.csv")
    if match and latent_file.exists():
        latent_frame = pd.read_csv(latent_file, float_precision="round_trip")
        latent_iters = latent_frame["iteration"].to_numpy(dtype=np.int64)
        latent = read_matrix(latent_file)

    return PosteriorTrace(
        names=names,
        natural=frame[list(names)].to_numpy(dtype=float),
        transformed=frame[[f"t_{n}" for n in names]].to_numpy(dtype=float),
        loglik_hat=frame["loglik_hat"].to_numpy(dtype=float),
        accepted=frame["accepted"].to_numpy(dtype=int).astype(bool),
        chain=chain,
        latent_iterations=latent_iters,
        latent_vbar_draws=latent,
    )


def read_traces(directory: str) -> List[PosteriorTrace]:
    """Every trace_chain{i}.csv in directory, in chain order"""
    found = []
    for p in Path(directory).glob("trace_chain*.csv"):
        match = _TRACE_NAME.search(p.name)
        if match:
            found.append((int(match.group(1)), p))
    if not found:
        raise DataError("no trace_chain*.csv files", path=str(directory))
    return [read_trace(p) for _, p in sorted(found)]


def manifest_path(output_dir: str, command: str) -> Path:
    return Path(output_dir) / f"manifest_{command}.json"


def write_manifest(output_dir: str, command: str, config: Mapping[str, Any], outputs: List[str],
                   timing: Dict[str, float], host: Dict[str, Any]) -> Path:
    """
    manifest_{command}.json: everything needed to rerun the command (pass it
    back with --config). "timing" and "host" are informational and excluded
    from reproducibility checks.
    """
    manifest = {
        "command": command,
        "seed": config["runtime"]["seed"],
        "config": config,
        "outputs": sorted(outputs),
        "versions": {
            "ggplevy": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
        "timing": timing,
        "host": host,
    }
    path = manifest_path(output_dir, command)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)
    logger.info(f"Wrote run manifest to {path}")
    return path


def read_manifest(path) -> Dict[str, Any]:
    with open(path, 'r') as f:
        return json.load(f)
