"""Tests for the command-line front end."""

import json
import math

import numpy as np
import pytest

from eesm_kit.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_UNINFORMATIVE,
    build_parser,
    load_config,
    main,
)
from eesm_kit.eesm import AwgnPerReference, awgn_per, eesm_effective_sinr, to_db

SMALL_CFG = {
    "n_sc": 16,
    "n_taps": 4,
    "n_packets": 150,
    "symbols_per_packet": 8,
    "beta": 6.0,
    "snr_db": [17.0],
}


def write_config(tmp_path, **extra):
    cfg = dict(SMALL_CFG)
    cfg.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def write_trace(tmp_path, n, beta0=6.0, flat=False, force_error=None, seed=0):
    """Synthetic Bernoulli trace records following the parametric AWGN
    reference at the beta0 effective SINR."""
    rng = np.random.default_rng(seed)
    ref = AwgnPerReference(mid_db=15.0, slope_db=2.0)
    mid = math.log(10 ** 1.5)
    path = tmp_path / "trace.jsonl"
    with open(path, "w") as fh:
        for _ in range(n):
            if flat:
                gamma = np.full((8, 2), math.exp(rng.normal(mid, 1.0)))
            else:
                gamma = np.exp(rng.normal(mid, 1.0, (8, 2)))
            p = awgn_per(ref, to_db(eesm_effective_sinr(gamma, beta0)))
            error = force_error if force_error is not None \
                else int(rng.random() < p)
            fh.write(json.dumps({"gamma": gamma.tolist(), "error": error})
                     + "\n")
    ref_path = tmp_path / "ref.csv"
    snrs = np.linspace(0.0, 30.0, 61)
    rows = "\n".join(f"{s},{awgn_per(ref, s)}" for s in snrs)
    ref_path.write_text("snr_db,per\n" + rows + "\n")
    return str(path), str(ref_path)


class TestConfig:
    def test_defaults_complete(self):
        cfg = load_config()
        assert cfg["n_packets"] == 20000
        assert cfg["snr_db"] == [17.0]

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n_packet": 5}))
        assert main(["simulate", "--config", str(path)]) == EXIT_CONFIG

    def test_env_seed_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EESM_KIT_SEED", "7")
        assert load_config()["seed"] == 7

    def test_env_seed_invalid(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EESM_KIT_SEED", "seven")
        cfg_path = write_config(tmp_path)
        assert main(["simulate", "--config", cfg_path,
                     "--out", str(tmp_path / "out")]) == EXIT_CONFIG

    def test_help_lists_commands(self):
        text = build_parser().format_help()
        for cmd in ("simulate", "analyze", "calibrate", "validate", "fit"):
            assert cmd in text


class TestSimulate:
    def test_smoke_outputs(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "out"
        rc = main(["simulate", "--config", cfg_path, "--snr-db", "9",
                   "--sigma-e", "0.1", "--out", str(out)])
        assert rc == EXIT_OK
        d = out / "snr_9dB"
        for name in ("records.jsonl", "gamma_eff.json", "fit.json",
                     "hist.csv", "hist.png", "calibration.json"):
            assert (d / name).exists(), name
        assert (out / "per_vs_snr.csv").exists()
        assert (out / "per_vs_snr.png").exists()
        fit = json.loads((d / "fit.json").read_text())
        for key in ("mu", "sigma", "lambda1", "lambda2"):
            assert np.isfinite(fit[key])

    def test_zero_packets_rejected(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path)
        rc = main(["simulate", "--config", cfg_path, "--packets", "0",
                   "--out", str(tmp_path / "out")])
        assert rc == EXIT_CONFIG
        assert "n_packets" in capsys.readouterr().err

    def test_sigma_e_rule_recorded(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "out"
        rc = main(["simulate", "--config", cfg_path, "--snr-db", "10",
                   "--sigma-e", "rule", "--out", str(out)])
        assert rc == EXIT_OK
        with open(out / "snr_10dB" / "records.jsonl") as fh:
            first = json.loads(fh.readline())
        assert np.isclose(first["sigma_e2"], 0.05)  # 1/(n_t*SNR), n_t=2

    def test_deterministic_reruns(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "out"
        main(["simulate", "--config", cfg_path, "--out", str(out)])
        first = (out / "snr_17dB" / "records.jsonl").read_bytes()
        main(["simulate", "--config", cfg_path, "--out", str(out)])
        assert (out / "snr_17dB" / "records.jsonl").read_bytes() == first

    def test_seed_changes_results(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", cfg_path, "--out", str(out_a)])
        main(["simulate", "--config", cfg_path, "--seed", "5",
              "--out", str(out_b)])
        ga = json.loads((out_a / "snr_17dB" / "gamma_eff.json").read_text())
        gb = json.loads((out_b / "snr_17dB" / "gamma_eff.json").read_text())
        assert ga["gamma_eff"] != gb["gamma_eff"]


class TestAnalyze:
    def test_missing_beta(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path)
        rc = main(["analyze", "--config", cfg_path,
                   "--out", str(tmp_path / "out")])
        assert rc == EXIT_CONFIG
        assert "beta required" in capsys.readouterr().err

    def test_from_sim_comparison(self, tmp_path):
        cfg_path = write_config(tmp_path)
        sim_out = tmp_path / "sim"
        assert main(["simulate", "--config", cfg_path, "--sigma-e", "0",
                     "--out", str(sim_out)]) == EXIT_OK
        ana_out = tmp_path / "ana"
        rc = main(["analyze", "--config", cfg_path, "--sigma-e", "0",
                   "--mode", "consistent", "--from-sim", str(sim_out),
                   "--out", str(ana_out)])
        assert rc == EXIT_OK
        ks = json.loads(
            (ana_out / "snr_17dB" / "ks_vs_simulation.json").read_text())["ks"]
        assert 0.0 <= ks <= 1.0
        assert ks < 0.01  # identical samples at zero error, consistent mode
        assert (ana_out / "snr_17dB" / "analysis_fit.json").exists()

    def test_explicit_beta(self, tmp_path):
        cfg_path = write_config(tmp_path)
        rc = main(["analyze", "--config", cfg_path, "--beta", "6.0",
                   "--out", str(tmp_path / "out")])
        assert rc == EXIT_OK


class TestCalibrate:
    def test_recovers_beta(self, tmp_path, capsys):
        trace, ref = write_trace(tmp_path, 20_000)
        out = tmp_path / "cal.json"
        rc = main(["calibrate", "--trace", trace, "--ref", ref,
                   "--out", str(out)])
        assert rc == EXIT_OK
        beta = json.loads(out.read_text())["beta"]
        assert 5.4 <= beta <= 6.6
        capsys.readouterr()

    def test_uninformative_exit_code(self, tmp_path):
        trace, ref = write_trace(tmp_path, 300, force_error=1)
        rc = main(["calibrate", "--trace", trace, "--ref", ref])
        assert rc == EXIT_UNINFORMATIVE

    def test_flat_channel_degenerate(self, tmp_path, capsys):
        trace, ref = write_trace(tmp_path, 500, flat=True)
        rc = main(["calibrate", "--trace", trace, "--ref", ref])
        assert rc == EXIT_OK
        assert json.loads(capsys.readouterr().out)["degenerate"] is True

    def test_bad_trace(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(json.dumps({"gamma": [[1.0]], "error": 5}) + "\n")
        _, ref = write_trace(tmp_path, 120)
        rc = main(["calibrate", "--trace", str(bad), "--ref", ref])
        assert rc == EXIT_CONFIG


class TestValidate:
    def test_lemma1(self, tmp_path):
        out = tmp_path / "report.json"
        rc = main(["validate", "lemma1", "--packets", "40",
                   "--out", str(out)])
        assert rc == EXIT_OK
        assert json.loads(out.read_text())["passed"] is True

    def test_oracles(self, tmp_path):
        out = tmp_path / "report.json"
        rc = main(["validate", "oracles", "--draws", "20000",
                   "--out", str(out)])
        assert rc == EXIT_OK
        report = json.loads(out.read_text())
        assert all(c["passed"] for c in report["cases"])


class TestFit:
    def test_fit_samples_file(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        samples = np.exp(rng.normal(2.0, 0.5, 500)).tolist()
        path = tmp_path / "samples.json"
        path.write_text(json.dumps({"gamma_eff": samples}))
        out = tmp_path / "fit.json"
        rc = main(["fit", "--samples", str(path), "--out", str(out)])
        assert rc == EXIT_OK
        fit = json.loads(out.read_text())
        for key in ("mu", "sigma", "lambda1", "lambda2", "loglik"):
            assert np.isfinite(fit[key])
        assert fit["ks"] < 0.05  # lognormal data is SGN with lambda1 = 0
        capsys.readouterr()

    def test_bad_samples_file(self, tmp_path):
        path = tmp_path / "samples.json"
        path.write_text("not json")
        assert main(["fit", "--samples", str(path)]) == EXIT_CONFIG


class TestExitCodes:
    def test_runtime_error_code(self, tmp_path):
        # valid config, but the channel file does not cover the run
        chan = tmp_path / "channels.jsonl"
        chan.write_text(json.dumps({
            "packet": 0,
            "H": [[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]],
        }) + "\n")
        cfg_path = write_config(tmp_path, channel_file=str(chan), n_sc=1,
                                n_packets=120)
        rc = main(["simulate", "--config", cfg_path,
                   "--out", str(tmp_path / "out")])
        assert rc == EXIT_RUNTIME
