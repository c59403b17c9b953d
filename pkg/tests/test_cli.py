import json
from pathlib import Path

import pandas as pd
import pytest

from ggplevy.cli import build_parser, main

FAST_FIT = [
    "--set", "model.kind=exp_gamma",
    "--set", "mcmc.n_iters=130",
    "--set", "mcmc.n_burnin=10",
    "--set", "mcmc.n_particles=20",
    "--set", "mcmc.latent_thin=1",
    "--set", "mcmc.n_workers=1",
]


@pytest.fixture(autouse=True)
def isolated_cwd(tmp_path, monkeypatch):
    """No ggp_config.json from the working tree leaks into a run"""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("HOME", str(tmp_path))


def _simulate(out: Path, seed: int = 0, n_obs: int = 30) -> int:
    return main(["--output", str(out), "--seed", str(seed), "--set", "model.kind=exp_gamma",
                 "--set", f"simulation.n_obs={n_obs}", "simulate"])


def test_parser_globals():
    args = build_parser().parse_args(["--seed", "3", "--set", "a.b=1", "--set", "c.d=2", "--json", "fit"])
    assert args.seed == 3
    assert args.set == ["a.b=1", "c.d=2"]
    assert args.command == "fit"


def test_no_command_prints_help(capsys):
    assert main([]) == 0
    assert "simulate" in capsys.readouterr().out


def test_simulate_writes_outputs_and_manifest(tmp_path):
    out = tmp_path / "sim"
    assert _simulate(out) == 0
    returns = pd.read_csv(out / "returns.csv")
    assert list(returns.columns) == ["delta", "log_return"]
    assert len(returns) == 30
    latent = pd.read_csv(out / "latent_vbar.csv")
    assert list(latent.columns) == ["k", "vbar"]

    manifest = json.loads((out / "manifest_simulate.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["config"]["model"]["kind"] == "exp_gamma"
    assert manifest["outputs"] == ["latent_vbar.csv", "returns.csv"]


def test_simulate_is_byte_reproducible(tmp_path):
    assert _simulate(tmp_path / "a", seed=4) == 0
    assert _simulate(tmp_path / "b", seed=4) == 0
    assert _simulate(tmp_path / "c", seed=5) == 0
    a = (tmp_path / "a" / "returns.csv").read_bytes()
    assert a == (tmp_path / "b" / "returns.csv").read_bytes()
    assert a != (tmp_path / "c" / "returns.csv").read_bytes()


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["--set", "model.eta=-1", "simulate"]) == 2
    assert "model.eta" in capsys.readouterr().err
    assert main(["--set", "nonsense", "simulate"]) == 2
    assert main(["--config", str(tmp_path / "missing.json"), "simulate"]) == 2
    # fit without an input series
    assert main(["--output", str(tmp_path / "out"), "fit"]) == 2


def test_data_errors_exit_3(tmp_path):
    assert main(["--set", f"data.input_path={tmp_path / 'missing.csv'}", "fit"]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,price\n0,1\n1,0\n")
    assert main(["--set", f"data.input_path={bad}", "fit"]) == 3


def test_numerical_failure_exit_4(tmp_path):
    """A model that cannot produce the observed returns never gets a finite likelihood"""
    _simulate(tmp_path / "sim")
    code = main([
        "--output", str(tmp_path / "fit"),
        "--set", f"data.input_path={tmp_path / 'sim' / 'returns.csv'}",
        "--set", "model.kind=exp_levy", "--set", "model.eta=1e-6", "--set", "model.sigma=-0.5",
        "--set", "prior.sigma_support=below_one",
        "--set", "mcmc.n_iters=5", "--set", "mcmc.n_burnin=0", "--set", "mcmc.n_particles=1",
        "fit",
    ])
    assert code == 4


def test_fit_predict_evaluate(tmp_path):
    sim, test, fit = tmp_path / "sim", tmp_path / "test", tmp_path / "fit"
    assert _simulate(sim, seed=1) == 0
    assert _simulate(test, seed=2, n_obs=20) == 0

    data = ["--output", str(fit),
            "--set", f"data.input_path={sim / 'returns.csv'}",
            "--set", f"data.test_path={test / 'returns.csv'}",
            "--set", f"data.truth_path={sim / 'latent_vbar.csv'}"]

    assert main(data + FAST_FIT + ["fit"]) == 0
    trace = pd.read_csv(fit / "trace_chain0.csv")
    assert list(trace.columns) == ["iteration", "eta", "c", "t_eta", "t_c", "loglik_hat", "accepted"]
    assert len(trace) == 120
    summary = pd.read_csv(fit / "summary.csv")
    assert list(summary["parameter"]) == ["eta", "c", "acceptance_chain0"]

    assert main(data + FAST_FIT + ["predict"]) == 0
    predictive = pd.read_csv(fit / "predictive.csv")
    assert predictive.shape == (120, 21)

    assert main(data + FAST_FIT + ["evaluate"]) == 0
    for name in ("ks.csv", "rank_bands.csv", "zeta.csv", "losses.csv"):
        assert (fit / name).exists()
    losses = pd.read_csv(fit / "losses.csv")
    assert list(losses["metric"]) == ["zeta_ks_uniform", "average_loss_l2", "average_loss_l1_0.95"]
    assert len(pd.read_csv(fit / "zeta.csv")) == 30
    manifests = {name: json.loads((fit / f"manifest_{name}.json").read_text())["command"]
                 for name in ("fit", "predict", "evaluate")}
    assert manifests == {"fit": "fit", "predict": "predict", "evaluate": "evaluate"}


def test_fit_reruns_from_its_manifest(tmp_path):
    assert _simulate(tmp_path / "sim", seed=3) == 0
    first = tmp_path / "first"
    assert main(["--output", str(first), "--seed", "3",
                 "--set", f"data.input_path={tmp_path / 'sim' / 'returns.csv'}"] + FAST_FIT + ["fit"]) == 0

    rerun = tmp_path / "rerun"
    assert main(["--config", str(first / "manifest_fit.json"), "--output", str(rerun), "fit"]) == 0
    for name in ("trace_chain0.csv", "latent_chain0.csv", "summary.csv"):
        assert (first / name).read_bytes() == (rerun / name).read_bytes()
    recorded = json.loads((rerun / "manifest_fit.json").read_text())["config"]
    assert recorded["runtime"]["seed"] == 3


def test_simulate_reruns_from_its_manifest(tmp_path):
    assert _simulate(tmp_path / "a", seed=3) == 0
    assert main(["--config", str(tmp_path / "a" / "manifest_simulate.json"),
                 "--output", str(tmp_path / "b"), "simulate"]) == 0
    assert (tmp_path / "a" / "returns.csv").read_bytes() == (tmp_path / "b" / "returns.csv").read_bytes()


def test_fit_is_reproducible_across_worker_counts(tmp_path):
    """Chain i always runs on stream (seed, i), in or out of process"""
    assert _simulate(tmp_path / "sim") == 0
    common = FAST_FIT[:-2] + ["--set", "mcmc.n_chains=2", "--set", "mcmc.n_iters=40",
                              "--set", f"data.input_path={tmp_path / 'sim' / 'returns.csv'}"]
    assert main(["--output", str(tmp_path / "serial"), "--set", "mcmc.n_workers=1"] + common + ["fit"]) == 0
    assert main(["--output", str(tmp_path / "pool"), "--set", "mcmc.n_workers=2"] + common + ["fit"]) == 0
    for chain in (0, 1):
        name = f"trace_chain{chain}.csv"
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "pool" / name).read_bytes()


def test_evaluate_needs_inputs(tmp_path):
    assert main(["--output", str(tmp_path / "empty"), "evaluate"]) == 2


def test_config_create_and_show(tmp_path, capsys):
    path = tmp_path / "conf" / "ggp.json"
    assert main(["config", "create", "--file", str(path)]) == 0
    written = json.loads(path.read_text())
    assert written["mcmc"]["n_iters"] == 4000
    capsys.readouterr()

    assert main(["--config", str(path), "--set", "runtime.seed=5", "config", "show"]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["runtime"]["seed"] == 5
