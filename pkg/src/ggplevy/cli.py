import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from .config import RunConfig, create_default_config, load_config, parse_override, set_config
from .core.rng import RngStream
from .errors import ConfigError, DataError, GgpLevyError
from .eval.harness import SelfTestRunner, create_invariant_suite
from .eval.metrics import LossKind, LossSpec, average_loss, bayes_estimate, ks_statistic, zeta_coverage
from .eval.predictive import PredictiveSample, ranked_squared_return_bands
from .exec.pool import get_host_stats, run_chains
from .inference.pmmh import posterior_predictive, summarize_traces
from .models.sv import simulate_returns
from .storage.results import read_matrix, read_traces, write_manifest, write_matrix, write_table, write_trace
from .storage.series import load_latent_series, load_return_series, write_return_series

logger = logging.getLogger(__name__)

SIMULATE_STREAM = 1000
PREDICT_STREAM = 2000


def _output_dir(config: RunConfig) -> Path:
    path = Path(config.runtime.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _finish(config: RunConfig, command: str, outputs: List[Path], started: float, args) -> int:
    write_manifest(
        str(_output_dir(config)),
        command,
        config.to_dict(),
        [p.name for p in outputs],
        timing={"wall_time_s": time.time() - started},
        host=get_host_stats(),
    )
    if args.json:
        print(json.dumps({"command": command, "outputs": [str(p) for p in outputs]}, indent=2))
    else:
        for p in outputs:
            print(f"  {p}")
    logger.info(f"{command} finished in {time.time() - started:.1f}s")
    return 0


def _require(value, field: str):
    if not value:
        raise ConfigError("required for this command", field=field)
    return value


def cmd_simulate(args, config: RunConfig) -> int:
    """Simulate returns and latent volatilities from the configured model"""
    started = time.time()
    spec = config.model_spec()
    delta = np.full(config.simulation.n_obs, config.simulation.delta)
    rng = RngStream(config.runtime.seed, stream_id=SIMULATE_STREAM)
    series, vbar = simulate_returns(rng, spec, delta)

    out = _output_dir(config)
    returns_path = out / "returns.csv"
    latent_file = out / "latent_vbar.csv"
    write_return_series(str(returns_path), series)
    write_table(latent_file, pd.DataFrame({"k": np.arange(vbar.size), "vbar": vbar}))
    return _finish(config, "simulate", [returns_path, latent_file], started, args)


def cmd_fit(args, config: RunConfig) -> int:
    """Run PMMH chains on the input series"""
    started = time.time()
    data = load_return_series(_require(config.data.input_path, "data.input_path"),
                              shape=config.data.shape, time_unit=config.data.time_unit)
    cfg = config.mcmc_config()
    traces = run_chains(config.model_spec(), config.prior_spec(), data, cfg, n_workers=config.mcmc.n_workers)

    out = _output_dir(config)
    outputs = []
    for trace in traces:
        outputs.append(write_trace(str(out), trace))
        if trace.latent_vbar_draws is not None:
            outputs.append(out / f"latent_chain{trace.chain}.csv")
    summary_path = out / "summary.csv"
    summary = summarize_traces(traces)
    write_table(summary_path, summary)
    outputs.append(summary_path)
    if not args.json:
        print(summary.to_string(index=False))
    return _finish(config, "fit", outputs, started, args)


def _trace_dir(config: RunConfig) -> str:
    return config.data.trace_dir or config.runtime.output_dir


def _horizon(config: RunConfig) -> np.ndarray:
    if config.data.test_path:
        return load_return_series(config.data.test_path, shape=config.data.shape,
                                  time_unit=config.data.time_unit).delta
    return np.full(config.simulation.n_obs, config.simulation.delta)


def cmd_predict(args, config: RunConfig) -> int:
    """Simulate one return series per posterior draw"""
    started = time.time()
    traces = read_traces(_trace_dir(config))
    delta = _horizon(config)
    rng = RngStream(config.runtime.seed, stream_id=PREDICT_STREAM)
    y, vbar = posterior_predictive(rng, config.model_spec(), traces, delta)

    out = _output_dir(config)
    predictive_path = out / "predictive.csv"
    vbar_path = out / "predictive_vbar.csv"
    write_matrix(predictive_path, y)
    write_matrix(vbar_path, vbar)
    return _finish(config, "predict", [predictive_path, vbar_path], started, args)


def _loss_specs(config: RunConfig) -> List[LossSpec]:
    return [LossSpec(LossKind.L2)] + [LossSpec(LossKind.L1_ALPHA, a) for a in config.evaluation.alphas]


def cmd_evaluate(args, config: RunConfig) -> int:
    """KS, rank bands, zeta coverage and losses against held-out or true values"""
    started = time.time()
    out = _output_dir(config)
    outputs = []
    trace_dir = Path(_trace_dir(config))

    predictive_file = trace_dir / "predictive.csv"
    if config.data.test_path and predictive_file.exists():
        test = load_return_series(config.data.test_path, shape=config.data.shape,
                                  time_unit=config.data.time_unit)
        predictive = PredictiveSample(read_matrix(predictive_file))
        ks_path = out / "ks.csv"
        write_table(ks_path, pd.DataFrame({
            "statistic": ["ks_returns"],
            "value": [ks_statistic(test.y, predictive.pooled())],
        }))
        bands_path = out / "rank_bands.csv"
        write_table(bands_path, ranked_squared_return_bands(predictive, test.y).to_frame())
        outputs += [ks_path, bands_path]
    else:
        logger.warning(f"Need data.test_path and {predictive_file}; skipping KS and rank bands")

    if config.data.truth_path:
        truth = load_latent_series(config.data.truth_path)
        traces = read_traces(str(trace_dir))
        latent = [t.latent_vbar_draws for t in traces if t.latent_vbar_draws is not None]
        if not latent:
            raise DataError("traces carry no latent draws", path=str(trace_dir))
        draws = np.vstack(latent)
        zeta = zeta_coverage(truth, draws)
        zeta_path = out / "zeta.csv"
        write_table(zeta_path, pd.DataFrame({"k": np.arange(zeta.zeta.size), "zeta": zeta.zeta}))
        losses_path = out / "losses.csv"
        rows: List[Dict[str, Any]] = [{"metric": "zeta_ks_uniform", "value": zeta.ks_vs_uniform}]
        for loss in _loss_specs(config):
            estimate = bayes_estimate(draws, loss, axis=0)
            rows.append({"metric": f"average_loss_{loss.label}", "value": average_loss(truth, estimate, loss)})
        write_table(losses_path, pd.DataFrame(rows))
        outputs += [zeta_path, losses_path]

    if not outputs:
        raise ConfigError("nothing to evaluate: set data.test_path (with predictive.csv) or data.truth_path", field="data.truth_path")
    return _finish(config, "evaluate", outputs, started, args)


def cmd_selftest(args, config: RunConfig) -> int:
    """Run the invariant suite"""
    runner = SelfTestRunner(output_dir=config.runtime.output_dir, seed=config.runtime.seed)
    result = runner.run_suite(create_invariant_suite())
    if args.json:
        print(json.dumps(result, indent=2, default=float))
    else:
        print(f"Self-test: {result['successful_tasks']}/{result['total_tasks']} checks passed")
        for r in result["results"]:
            status = "✓" if r["success"] else "✗"
            print(f"  {status} {r['task_id']}: {r['execution_time']:.2f}s")
            if r["error"]:
                print(f"    Error: {r['error']}")
    return 0 if result["all_passed"] else 4


def cmd_config(args, config: RunConfig) -> int:
    """Manage configuration"""
    if args.action == "create":
        create_default_config(args.file)
        return 0
    print(json.dumps(config.to_dict(), indent=2, sort_keys=True))
    return 0


def _overrides(args) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    for item in args.set or []:
        overrides.update(parse_override(item))
    if args.seed is not None:
        overrides["runtime.seed"] = args.seed
    if args.output is not None:
        overrides["runtime.output_dir"] = args.output
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ggp-levy",
        description="Simulation and pseudo-marginal inference for GGP-driven stochastic volatility",
    )
    parser.add_argument("--config", type=str, help="Path to configuration file")
    parser.add_argument("--seed", type=int, help="Random seed (overrides runtime.seed)")
    parser.add_argument("--output", type=str, help="Output directory (overrides runtime.output_dir)")
    parser.add_argument("--set", action="append", metavar="SECTION.FIELD=VALUE", help="Override a config field")
    parser.add_argument("--json", action="store_true", help="Output results in JSON format")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    simulate_parser = subparsers.add_parser("simulate", help="Simulate returns from the configured model")
    simulate_parser.set_defaults(func=cmd_simulate)

    fit_parser = subparsers.add_parser("fit", help="Fit the model to data.input_path by PMMH")
    fit_parser.set_defaults(func=cmd_fit)

    predict_parser = subparsers.add_parser("predict", help="Posterior predictive simulation")
    predict_parser.set_defaults(func=cmd_predict)

    evaluate_parser = subparsers.add_parser("evaluate", help="Predictive and latent-volatility metrics")
    evaluate_parser.set_defaults(func=cmd_evaluate)

    selftest_parser = subparsers.add_parser("selftest", help="Run the invariant suite")
    selftest_parser.set_defaults(func=cmd_selftest)

    config_parser = subparsers.add_parser("config", help="Manage configuration")
    config_parser.add_argument("action", choices=["create", "show"], help="Configuration action")
    config_parser.add_argument("--file", default="./ggp_config.json", help="Output file for create action")
    config_parser.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 0

    try:
        overrides = _overrides(args)
        config = load_config(args.config, overrides)
        config.runtime.setup_logging(verbose=args.verbose)
        set_config(config)
        logger.info(f"Running {args.command}")
        return args.func(args, config)
    except GgpLevyError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
