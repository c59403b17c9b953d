import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from .errors import ConfigError
from .guard.schema import fold_dotted_keys, validate_run_config
from .inference.pmmh import McmcConfig
from .inference.priors import GammaPrior, NormalPrior, PriorSpec, UniformPrior
from .models.sv import SvModelSpec

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = "./ggp_config.json"


@dataclass
class ModelConfig:
    """Model family and parameters (simulation truth, fit template and starting point)"""
    kind: str = "exp_levy"
    eta: float = 1.0
    sigma: float = 0.6
    tau: float = 3.0
    c: float = 1.0
    mu0: float = 0.0
    mu1: float = 0.0
    lam: Optional[float] = None


@dataclass
class PriorConfig:
    """Hyperparameters; tau is given a prior through tau - 1"""
    eta_shape: float = 0.1
    eta_rate: float = 0.1
    c_shape: float = 0.1
    c_rate: float = 0.1
    tau_minus_one_shape: float = 1.0
    tau_minus_one_rate: float = 1.0
    lam_shape: float = 0.1
    lam_rate: float = 0.1
    # "unit": sigma ~ Uniform(0, 1); "below_one": log(1 - sigma) ~ Normal(0, 1)
    sigma_support: str = "unit"


@dataclass
class McmcSettings:
    """Sampler settings"""
    n_iters: int = 4000
    n_burnin: int = 1000
    n_particles: int = 1000
    n_chains: int = 1
    proposal_step: Union[float, Dict[str, float]] = 0.1
    adapt: bool = True
    latent_thin: int = 10
    n_workers: Optional[int] = None
    init: Optional[Dict[str, float]] = None


@dataclass
class SimulationConfig:
    """Length and spacing of simulated series"""
    n_obs: int = 1000
    delta: float = 1.0


@dataclass
class DataConfig:
    """Input files"""
    input_path: Optional[str] = None
    shape: str = "auto"
    # timestamp units per model time unit
    time_unit: float = 1.0
    trace_dir: Optional[str] = None
    test_path: Optional[str] = None
    truth_path: Optional[str] = None


@dataclass
class EvaluationConfig:
    alphas: List[float] = field(default_factory=lambda: [0.95])


@dataclass
class RuntimeConfig:
    """Seed, output location and logging"""
    seed: int = 0
    output_dir: str = "./ggp_output"
    enable_logging: bool = True
    log_level: str = "INFO"
    log_file: Optional[str] = None

    def setup_logging(self, verbose: bool = False):
        if not self.enable_logging:
            return
        level = logging.DEBUG if verbose else getattr(logging, self.log_level.upper(), logging.INFO)
        handlers: List[logging.Handler] = [logging.StreamHandler()]
        if self.log_file:
            handlers.append(logging.FileHandler(self.log_file))
        logging.basicConfig(
            level=level,
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            handlers=handlers,
            force=True,
        )


_SECTIONS = {
    "model": ModelConfig,
    "prior": PriorConfig,
    "mcmc": McmcSettings,
    "simulation": SimulationConfig,
    "data": DataConfig,
    "evaluation": EvaluationConfig,
    "runtime": RuntimeConfig,
}


@dataclass
class RunConfig:
    """Complete run configuration"""
    model: ModelConfig = field(default_factory=ModelConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    mcmc: McmcSettings = field(default_factory=McmcSettings)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    data: DataConfig = field(default_factory=DataConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        """Merge data over the defaults and validate the result as a whole"""
        merged = cls().to_dict()
        for section, values in fold_dotted_keys(data).items():
            if section not in merged or not isinstance(values, Mapping):
                raise ConfigError("unknown section", field=section)
            merged[section].update(values)
        validated = validate_run_config(merged).model_dump()
        return cls(**{name: _SECTIONS[name](**validated[name]) for name in _SECTIONS})

    @classmethod
    def from_file(cls, config_path: str, overrides: Optional[Mapping[str, Any]] = None) -> "RunConfig":
        """Load a JSON configuration or run manifest; overrides (dotted keys) win over the file"""
        config_file = Path(config_path)
        if not config_file.exists():
            raise ConfigError(f"config file {config_path} not found", field="config")
        try:
            with open(config_file, 'r') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON at line {e.lineno}: {e.msg}", field="config") from e
        if not isinstance(data, dict):
            raise ConfigError("top level must be an object", field="config")
        if "command" in data and isinstance(data.get("config"), dict):
            # a run manifest: rerun with the configuration it recorded
            logger.info(f"Reading configuration from {data['command']} manifest {config_path}")
            data = data["config"]
        return cls.from_dict(_merge(data, overrides or {}))

    def to_file(self, config_path: str):
        config_file = Path(config_path)
        config_file.parent.mkdir(parents=True, exist_ok=True)
        with open(config_file, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        logger.info(f"Saved configuration to {config_path}")

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        return RunConfig.from_dict(_merge(self.to_dict(), overrides))

    # domain objects ---------------------------------------------------------

    def model_spec(self) -> SvModelSpec:
        m = self.model
        params = {"eta": m.eta, "sigma": m.sigma, "tau": m.tau, "c": m.c, "lam": m.lam}
        return SvModelSpec.build(m.kind, params, mu0=m.mu0, mu1=m.mu1)

    def prior_spec(self) -> PriorSpec:
        p = self.prior
        sigma = NormalPrior(0.0, 1.0) if p.sigma_support == "below_one" else UniformPrior(0.0, 1.0)
        return PriorSpec(
            eta=GammaPrior(p.eta_shape, p.eta_rate),
            c=GammaPrior(p.c_shape, p.c_rate),
            tau_minus_one=GammaPrior(p.tau_minus_one_shape, p.tau_minus_one_rate),
            sigma=sigma,
            lam=GammaPrior(p.lam_shape, p.lam_rate),
        )

    def mcmc_config(self) -> McmcConfig:
        s = self.mcmc
        return McmcConfig(
            n_iters=s.n_iters,
            n_burnin=s.n_burnin,
            n_particles=s.n_particles,
            n_chains=s.n_chains,
            proposal_step=s.proposal_step,
            seed=self.runtime.seed,
            adapt=s.adapt,
            latent_thin=s.latent_thin,
            init=s.init,
        )


def _merge(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged = {k: dict(v) if isinstance(v, Mapping) else v for k, v in fold_dotted_keys(base).items()}
    for section, values in fold_dotted_keys(overrides).items():
        if isinstance(values, Mapping):
            merged.setdefault(section, {}).update(values)
        else:
            merged[section] = values
    return merged


def parse_override(text: str) -> Dict[str, Any]:
    """'section.field=value' with value read as JSON when possible"""
    key, sep, raw = text.partition("=")
    if not sep or "." not in key:
        raise ConfigError(f"override must look like section.field=value, got {text!r}", field="set")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return {key.strip(): value}


def load_config(config_path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Load the run configuration from config_path, ./ggp_config.json or defaults"""
    if config_path is None:
        possible_paths = [
            DEFAULT_CONFIG_FILE,
            os.path.expanduser("~/.ggplevy/config.json"),
        ]
        for path in possible_paths:
            if Path(path).exists():
                config_path = path
                break

    if config_path:
        return RunConfig.from_file(config_path, overrides)
    logger.info("No config file found, using default configuration")
    return RunConfig.from_dict(overrides or {})


def create_default_config(output_path: str = DEFAULT_CONFIG_FILE):
    """Write the default configuration file"""
    RunConfig().to_file(output_path)
    print(f"Created default configuration at {output_path}")


# Global configuration instance
_global_config: Optional[RunConfig] = None


def get_config() -> RunConfig:
    global _global_config
    if _global_config is None:
        _global_config = load_config()
    return _global_config


def set_config(config: RunConfig):
    global _global_config
    _global_config = config
