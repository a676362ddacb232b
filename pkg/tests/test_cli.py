"""End-to-end command-line tests (in-process via click's CliRunner)."""
from __future__ import annotations

import json

import numpy as np
import pytest
from click.testing import CliRunner

from volfn.cli import main
from volfn.errors import NumericError
from volfn.grid import save_csv
from volfn.sim import FactorModelParams, simulate_factor

DN = 1.0 / 23400


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def _err_text(result) -> str:
    try:
        return result.output + result.stderr
    except ValueError:  # stderr not captured separately
        return result.output


@pytest.fixture(scope="module")
def scalar_csv(tmp_path_factory, runner):
    out = tmp_path_factory.mktemp("simdata")
    result = runner.invoke(
        main,
        ["simulate", "--model", "scalar", "--days", "0.5", "--seed", "3",
         "--delta-n", str(DN), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    return out / "grid.csv"


@pytest.fixture(scope="module")
def panel_csv(tmp_path_factory):
    params = FactorModelParams.build(d=3, r=1)
    sim = simulate_factor(params, DN, days=0.5, seed=21)
    out = tmp_path_factory.mktemp("paneldata")
    path = out / "panel.csv"
    save_csv(sim.grid, path)
    return path


def test_version_flag(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert "volfn" in result.output


def test_kernel_constants_stdout(runner):
    result = runner.invoke(main, ["kernel-constants"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["profile"] == "minmax"
    assert payload["phi0_at_0"] == pytest.approx(1.0 / 12.0, rel=1e-7)
    assert payload["Phi00"] == pytest.approx(151.0 / 80640.0, rel=1e-7)
    assert payload["Psi11"] == pytest.approx(1.0 / 24.0, rel=1e-7)


def test_kernel_constants_output_dir(runner, tmp_path):
    result = runner.invoke(main, ["kernel-constants", "--out", str(tmp_path)])
    assert result.exit_code == 0
    written = json.loads((tmp_path / "constants.json").read_text())
    assert written["Phi01"] == pytest.approx(1.0 / 96.0, rel=1e-7)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "kernel-constants"
    assert "constants.json" in manifest["outputs"]
    assert manifest["config"]["mesh"] == 2048
    assert "version" in manifest


def test_simulate_is_bit_reproducible(runner, tmp_path):
    args = ["simulate", "--model", "scalar", "--days", "0.05", "--delta-n",
            "0.001", "--seed", "7"]
    one, two = tmp_path / "one", tmp_path / "two"
    r1 = runner.invoke(main, args + ["--out", str(one)])
    r2 = runner.invoke(main, args + ["--out", str(two)])
    assert r1.exit_code == 0, r1.output
    assert r2.exit_code == 0
    assert "scalar path" in r1.output and "bipower" in r1.output
    assert (one / "grid.csv").read_bytes() == (two / "grid.csv").read_bytes()
    assert (one / "latent.csv").read_bytes() == (two / "latent.csv").read_bytes()
    assert (one / "latent.csv").read_text().splitlines()[0] == "t,c,x"
    # manifests differ only in the resolved output path; a rerun into the
    # SAME directory must reproduce the manifest byte for byte (no clocks)
    snapshot = (one / "manifest.json").read_bytes()
    r3 = runner.invoke(main, args + ["--out", str(one)])
    assert r3.exit_code == 0
    assert (one / "manifest.json").read_bytes() == snapshot


def test_simulate_factor_writes_spectra(runner, tmp_path):
    result = runner.invoke(
        main,
        ["simulate", "--model", "factor", "--days", "0.02", "--delta-n",
         "0.001", "-d", "3", "-r", "1", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    header = (tmp_path / "latent.csv").read_text().splitlines()[0]
    assert header == "t,lambda_1,lambda_2,lambda_3"
    assert "factor panel" in result.output


def test_estimate_end_to_end(runner, scalar_csv, tmp_path):
    result = runner.invoke(
        main,
        ["estimate", "--data", str(scalar_csv), "--delta-n", str(DN),
         "--functional", "square", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, _err_text(result)
    assert "square[0] =" in result.output and "CI95%" in result.output
    est = json.loads((tmp_path / "estimate.json").read_text())
    assert est["functional"] == "square"
    assert est["mode"] == "hat"
    assert est["n"] == 11700
    assert len(est["value"]) == 1 and np.isfinite(est["value"][0])
    lo, hi = est["ci"][0]
    assert lo < est["value"][0] < hi
    assert isinstance(est["plan"]["k_n"], int) and est["plan"]["k_n"] > 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert str(scalar_csv) in manifest["inputs"]
    assert "estimate.json" in manifest["outputs"]


def test_estimate_config_defaults_and_flag_precedence(runner, scalar_csv, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        'level = 0.9\n\n[estimate]\ntheta = 0.8\nfunctional_name = "trace"\n'
    )
    result = runner.invoke(
        main,
        ["estimate", "--config", str(cfg), "--data", str(scalar_csv),
         "--delta-n", str(DN), "--theta", "1.0", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, _err_text(result)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["theta"] == 1.0  # explicit flag beats config
    assert manifest["config"]["level"] == 0.9  # flat config key applies
    est = json.loads((tmp_path / "estimate.json").read_text())
    assert est["functional"] == "trace"  # section config key applies


def test_estimate_rejects_unknown_config_keys(runner, scalar_csv, tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("zeta = 3\n")
    result = runner.invoke(
        main,
        ["estimate", "--config", str(cfg), "--data", str(scalar_csv),
         "--delta-n", str(DN), "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
    assert "unknown config keys" in _err_text(result)


def test_exit_code_2_for_tuning_violation(runner, scalar_csv, tmp_path):
    result = runner.invoke(
        main,
        ["estimate", "--data", str(scalar_csv), "--delta-n", str(DN),
         "--kappa", "0.6", "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
    assert "kappa" in _err_text(result)


def test_exit_code_2_for_mode_delta_conflict(runner, scalar_csv, tmp_path):
    result = runner.invoke(
        main,
        ["estimate", "--data", str(scalar_csv), "--delta-n", str(DN),
         "--mode", "hat", "--delta", "0.2", "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
    assert "PSD-mode" in _err_text(result)


def test_exit_code_3_for_ragged_csv(runner, tmp_path):
    bad = tmp_path / "ragged.csv"
    bad.write_text("A,B\n0.1,0.2\n0.3\n")
    result = runner.invoke(
        main,
        ["estimate", "--data", str(bad), "--delta-n", "0.001",
         "--out", str(tmp_path)],
    )
    assert result.exit_code == 3


def test_exit_code_4_for_numeric_failure(runner, tmp_path, monkeypatch):
    def broken(profile, mesh=2048, rtol=1e-8):
        raise NumericError("synthetic non-convergence")

    monkeypatch.setattr("volfn.cli.constants", broken)
    result = runner.invoke(main, ["kernel-constants", "--out", str(tmp_path)])
    assert result.exit_code == 4
    assert "synthetic" in _err_text(result)


def test_pca_command(runner, panel_csv, tmp_path):
    result = runner.invoke(
        main,
        ["pca", "--data", str(panel_csv), "--delta-n", str(DN),
         "--clusters", "1,2", "--eigenvector", "1", "--dump-windows",
         "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, _err_text(result)
    assert "lambda[1]" in result.output and "q[1]" in result.output
    payload = json.loads((tmp_path / "pca.json").read_text())
    assert payload["mode"] == "tilde"
    assert payload["eigenvalues"]["clusters"] == [1, 2]
    assert len(payload["eigenvalues"]["value"]) == 2
    assert payload["eigenvalues"]["value"][0] > payload["eigenvalues"]["value"][1]
    assert payload["eigenvector"]["k"] == 1
    assert len(payload["eigenvector"]["value"]) == 3
    header = (tmp_path / "windows.csv").read_text().splitlines()[0]
    assert header == (
        "window,lambda_1,lambda_2,lambda_3,q1_1,q1_2,q1_3"
    )
    assert "windows.csv" in json.loads(
        (tmp_path / "manifest.json").read_text()
    )["outputs"]


def test_pca_rejects_hat_mode(runner, panel_csv, tmp_path):
    result = runner.invoke(
        main,
        ["pca", "--data", str(panel_csv), "--delta-n", str(DN),
         "--clusters", "1,2", "--mode", "hat", "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
    assert "PSD" in _err_text(result)


def test_pca_requires_a_target(runner, panel_csv, tmp_path):
    result = runner.invoke(
        main,
        ["pca", "--data", str(panel_csv), "--delta-n", str(DN),
         "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
    assert "--clusters" in _err_text(result)


def test_mc_command(runner, tmp_path):
    cfg = tmp_path / "study.toml"
    cfg.write_text(
        "\n".join(
            [
                'model = "scalar"',
                "replications = 2",
                "days = 2.0",
                "delta_n = 0.001",
                "seed = 5",
                "",
                "[target]",
                'type = "functional"',
                'name = "square"',
                "",
                "[plan]",
                'mode = "hat"',
            ]
        )
        + "\n"
    )
    out = tmp_path / "mcout"
    result = runner.invoke(
        main, ["mc", "--config", str(cfg), "--plot-data", "--out", str(out)]
    )
    assert result.exit_code == 0, _err_text(result)
    assert "square: coverage" in result.output
    summary = json.loads((out / "summary.json").read_text())
    assert summary["components"] == ["square"]
    assert summary["replications"] == 2
    records = (out / "records.csv").read_text().splitlines()
    assert len(records) == 3  # header + 2 reps
    assert (out / "plot_square.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["reps"] == 2


def test_mc_rejects_bad_toml(runner, tmp_path):
    cfg = tmp_path / "broken.toml"
    cfg.write_text("model = [unclosed\n")
    result = runner.invoke(main, ["mc", "--config", str(cfg),
                                  "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "bad TOML" in _err_text(result)
