"""
Validation of run configurations.

A configuration document may nest keys by section or use flat dotted keys
("mcmc.n_iters"); both are folded into sections before validation. Every
failure is raised as ConfigError naming the dotted field path.
"""

import logging
from typing import Any, Dict, List, Literal, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from ..errors import ConfigError

logger = logging.getLogger(__name__)

UINT64_MAX = 2**64 - 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSchema(_Section):
    kind: Literal["exp_levy", "exp_gamma", "ou_gamma", "ou_ggp"]
    eta: PositiveFloat
    sigma: float = Field(lt=1.0, allow_inf_nan=False)
    tau: PositiveFloat
    c: PositiveFloat
    mu0: float = Field(allow_inf_nan=False)
    mu1: float = Field(allow_inf_nan=False)
    lam: Optional[PositiveFloat]

    @model_validator(mode="after")
    def check_kind(self):
        if self.kind in ("ou_gamma", "ou_ggp") and self.lam is None:
            raise ValueError(f"{self.kind} needs the OU rate lam")
        if self.kind == "ou_ggp" and self.sigma != 0.0:
            raise ValueError("ou_ggp needs sigma == 0")
        return self


class PriorSchema(_Section):
    eta_shape: PositiveFloat
    eta_rate: PositiveFloat
    c_shape: PositiveFloat
    c_rate: PositiveFloat
    tau_minus_one_shape: PositiveFloat
    tau_minus_one_rate: PositiveFloat
    lam_shape: PositiveFloat
    lam_rate: PositiveFloat
    sigma_support: Literal["unit", "below_one"]


class McmcSchema(_Section):
    n_iters: PositiveInt
    n_burnin: int = Field(ge=0)
    n_particles: PositiveInt
    n_chains: PositiveInt
    proposal_step: Union[PositiveFloat, Dict[str, PositiveFloat]]
    adapt: bool
    latent_thin: int = Field(ge=0)
    n_workers: Optional[PositiveInt]
    init: Optional[Dict[str, float]]

    @model_validator(mode="after")
    def check_burnin(self):
        if self.n_burnin >= self.n_iters:
            raise ValueError(f"n_burnin ({self.n_burnin}) must be smaller than n_iters ({self.n_iters})")
        return self


class SimulationSchema(_Section):
    n_obs: PositiveInt
    delta: PositiveFloat


class DataSchema(_Section):
    input_path: Optional[str]
    shape: Literal["auto", "prices", "returns"]
    time_unit: PositiveFloat
    trace_dir: Optional[str]
    test_path: Optional[str]
    truth_path: Optional[str]


class EvaluationSchema(_Section):
    alphas: List[float]

    @model_validator(mode="after")
    def check_alphas(self):
        if any(not 0.0 < a < 1.0 for a in self.alphas):
            raise ValueError(f"alphas must lie in (0, 1), got {self.alphas}")
        return self


class RuntimeSchema(_Section):
    seed: int = Field(ge=0, le=UINT64_MAX)
    output_dir: str
    enable_logging: bool
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"]
    log_file: Optional[str]


class RunSchema(_Section):
    model: ModelSchema
    prior: PriorSchema
    mcmc: McmcSchema
    simulation: SimulationSchema
    data: DataSchema
    evaluation: EvaluationSchema
    runtime: RuntimeSchema


def fold_dotted_keys(raw: Mapping[str, Any]) -> Dict[str, Any]:
    """Turn {"mcmc.n_iters": 10} into {"mcmc": {"n_iters": 10}}; nested input passes through"""
    folded: Dict[str, Any] = {}
    for key, value in raw.items():
        if "." in key:
            section, _, name = key.partition(".")
            target = folded.setdefault(section, {})
            if not isinstance(target, dict):
                raise ConfigError("section given both as value and as dotted keys", field=section)
            target[name] = value
        elif isinstance(value, Mapping):
            folded.setdefault(key, {}).update(value)
        else:
            folded[key] = value
    return folded


def _field_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error["loc"] if not str(part).startswith("function-"))


def validate_run_config(raw: Mapping[str, Any]) -> RunSchema:
    """Validate a complete configuration document (nested or dotted)"""
    try:
        return RunSchema.model_validate(fold_dotted_keys(raw))
    except ValidationError as e:
        first = e.errors()[0]
        path = _field_path(first)
        message = first["msg"]
        logger.debug(f"Configuration rejected: {e}")
        raise ConfigError(message, field=path or None) from e
