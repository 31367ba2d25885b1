"""Command-line front end.

Commands: simulate | analyze | calibrate | validate | fit. The CLI
speaks dB; everything internal is linear. Each run is deterministic
given config + seed (EESM_KIT_SEED overrides the config seed) and
rerunning overwrites identical files.

Exit codes: 0 success, 1 configuration error, 2 runtime error,
3 uninformative calibration dataset.
"""

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from eesm_kit import io, pipeline, plots
from eesm_kit.channel import ChannelConfig
from eesm_kit.eesm import AwgnPerReference, UninformativeDatasetError, calibrate_beta
from eesm_kit.logsgn import fit_logsgn, ks_distance, sgn_pdf

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_UNINFORMATIVE = 3

_DB_PER_LN = 10.0 / math.log(10.0)

DEFAULT_CONFIG = {
    "n_t": 2,
    "n_r": 2,
    "n_s": 2,
    "n_sc": 242,
    "n_taps": 8,
    "decay": 0.5,
    "snr_db": [17.0],
    "sigma_e": 0.0,
    "n_packets": 20000,
    "modulation_order": 16,
    "symbols_per_packet": 64,
    "analytical_mode": "paper_literal",
    "drop_duplicate_noise_term_in_E": False,
    "beta": "calibrate",
    "beta_search": [0.05, 100.0],
    "awgn_ref": {"mid_db": 15.0, "slope_db": 2.0},
    "error_correlated_across_subcarriers": False,
    "seed": 0,
    "threads": 1,
    "channel_file": None,
    "out_dir": "eesm-out",
    "verbosity": 1,
}


class ConfigError(ValueError):
    pass


def load_config(path=None, overrides=None) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    if overrides:
        cfg.update({k: v for k, v in overrides.items() if v is not None})
    if "EESM_KIT_SEED" in os.environ:
        try:
            cfg["seed"] = int(os.environ["EESM_KIT_SEED"])
        except ValueError as exc:
            raise ConfigError("EESM_KIT_SEED must be an integer") from exc
    return cfg


def _awgn_ref_from_config(spec) -> AwgnPerReference:
    if isinstance(spec, dict):
        unknown = set(spec) - {"mid_db", "slope_db", "csv"}
        if unknown:
            raise ConfigError(f"unknown awgn_ref keys: {sorted(unknown)}")
        if "csv" in spec:
            return io.load_awgn_reference_csv(spec["csv"])
        return AwgnPerReference(mid_db=spec["mid_db"], slope_db=spec["slope_db"])
    raise ConfigError("awgn_ref must be an object")


def build_run_config(cfg: dict) -> pipeline.RunConfig:
    try:
        channel = ChannelConfig(
            n_t=cfg["n_t"], n_r=cfg["n_r"], n_s=cfg["n_s"], n_sc=cfg["n_sc"],
            n_taps=cfg["n_taps"], decay=cfg["decay"], seed=cfg["seed"],
        )
        sigma_e = cfg["sigma_e"]
        if isinstance(sigma_e, str) and sigma_e != "rule":
            sigma_e = float(sigma_e)
        beta = cfg["beta"]
        if isinstance(beta, str) and beta != "calibrate":
            beta = float(beta)
        channels = None
        if cfg["channel_file"]:
            channels = io.read_channels_jsonl(cfg["channel_file"], cfg["n_s"])
        return pipeline.RunConfig(
            channel=channel,
            snr_db=tuple(float(s) for s in cfg["snr_db"]),
            sigma_e=sigma_e,
            n_packets=cfg["n_packets"],
            modulation_order=cfg["modulation_order"],
            symbols_per_packet=cfg["symbols_per_packet"],
            analytical_mode=cfg["analytical_mode"],
            drop_duplicate_noise_term_in_e=cfg["drop_duplicate_noise_term_in_E"],
            beta=beta,
            beta_search=tuple(cfg["beta_search"]),
            awgn_ref=_awgn_ref_from_config(cfg["awgn_ref"]),
            error_correlated_across_subcarriers=cfg[
                "error_correlated_across_subcarriers"],
            seed=cfg["seed"],
            threads=cfg["threads"],
            channels=channels,
        )
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def _snr_dir(out_dir: Path, snr_db: float) -> Path:
    d = out_dir / f"snr_{snr_db:g}dB"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _fit_overlay_db(fit, lo_db, hi_db):
    """Fitted log-SGN density expressed over the dB axis."""
    xs_db = np.linspace(lo_db, hi_db, 400)
    xs_ln = xs_db / _DB_PER_LN
    return xs_db, sgn_pdf(xs_ln, fit.params) / _DB_PER_LN


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, {
        "snr_db": args.snr_db, "sigma_e": args.sigma_e,
        "n_packets": args.packets, "beta": args.beta, "seed": args.seed,
        "out_dir": args.out, "threads": args.threads,
    })
    run_cfg = build_run_config(cfg)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    per_rows = []
    for snr_db in run_cfg.snr_db:
        result = pipeline.run_simulation_flow(run_cfg, snr_db=snr_db)
        d = _snr_dir(out_dir, snr_db)
        io.write_records_jsonl(result.records, d / "records.jsonl")
        io.write_gamma_eff_json(result.gamma_eff, d / "gamma_eff.json")
        result.fit.to_json(d / "fit.json")
        eff_db = 10.0 * np.log10(result.gamma_eff)
        io.write_histogram_csv(eff_db, d / "hist.csv")
        plots.render_histogram(
            eff_db, d / "hist.png",
            title=f"simulation flow, SNR {snr_db:g} dB",
            overlay=_fit_overlay_db(result.fit, eff_db.min(), eff_db.max()),
        )
        cal = {"beta": result.beta, "sigma_e2": result.sigma_e2,
               "snr_db": snr_db}
        if result.calibration is not None:
            cal.update(io.calibration_to_dict(result.calibration))
        io.write_json(cal, d / "calibration.json")
        per = float(np.mean([r.error for r in result.records]))
        per_rows.append((snr_db, per))
        if cfg["verbosity"]:
            print(f"snr {snr_db:g} dB: per={per:.4f} beta={result.beta:.4f} "
                  f"fit={result.fit.params.as_dict()}")

    io.write_per_vs_snr_csv(per_rows, out_dir / "per_vs_snr.csv")
    snrs, pers = zip(*per_rows)
    plots.render_per_curve({"simulation": (snrs, pers)},
                           out_dir / "per_vs_snr.png")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = load_config(args.config, {
        "snr_db": args.snr_db, "sigma_e": args.sigma_e, "seed": args.seed,
        "n_packets": args.packets, "out_dir": args.out, "threads": args.threads,
        "analytical_mode": args.mode,
    })
    run_cfg = build_run_config(cfg)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    sim_dir = Path(args.from_sim) if args.from_sim else None
    for snr_db in run_cfg.snr_db:
        beta = args.beta
        if beta is None and sim_dir is not None:
            cal_path = sim_dir / f"snr_{snr_db:g}dB" / "calibration.json"
            if cal_path.exists():
                with open(cal_path) as fh:
                    beta = json.load(fh)["beta"]
        if beta is None:
            print("error: beta required (obtain it from the simulation steps)",
                  file=sys.stderr)
            return EXIT_CONFIG

        result = pipeline.run_analysis_flow(run_cfg, float(beta), snr_db=snr_db)
        d = _snr_dir(out_dir, snr_db)
        io.write_gamma_eff_json(result.gamma_eff, d / "analysis_gamma_eff.json")
        result.fit.to_json(d / "analysis_fit.json")
        line = (f"snr {snr_db:g} dB: mode={result.mode} beta={beta:g} "
                f"fit={result.fit.params.as_dict()}")

        if sim_dir is not None:
            sim_samples = io.read_gamma_eff_json(
                sim_dir / f"snr_{snr_db:g}dB" / "gamma_eff.json")
            ks = ks_distance(result.gamma_eff, sim_samples)
            io.write_json({"ks": ks, "snr_db": snr_db, "mode": result.mode,
                           "n_analysis": len(result.gamma_eff),
                           "n_simulation": len(sim_samples)},
                          d / "ks_vs_simulation.json")
            line += f" ks_vs_simulation={ks:.4f}"
        if cfg["verbosity"]:
            print(line)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    try:
        records = io.read_records_jsonl(args.trace)
        ref = io.load_awgn_reference_csv(args.ref)
    except (io.IngestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cal = calibrate_beta(records, ref, search=tuple(args.search),
                             objective_mode=args.objective_mode)
    except UninformativeDatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNINFORMATIVE

    out = io.calibration_to_dict(cal)
    print(json.dumps(out, indent=2, sort_keys=True))
    if args.out:
        io.write_json(out, args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.suite == "lemma1":
        kwargs = {}
        if args.packets:
            kwargs["n_packets"] = args.packets
        report = pipeline.lemma1_suite(seed=args.seed, **kwargs)
    elif args.suite == "oracles":
        kwargs = {}
        if args.draws:
            kwargs["n_draws"] = args.draws
        report = pipeline.oracle_suite(seed=args.seed, **kwargs)
    else:  # distribution-match
        kwargs = {}
        if args.packets:
            kwargs["n_packets"] = args.packets
        report = pipeline.distribution_match_suite(seed=args.seed, **kwargs)

    io.write_json(report, args.out)
    status = "PASS" if report["passed"] else "FAIL"
    print(f"{args.suite}: {status} ({len(report['cases'])} cases, "
          f"report in {args.out})")
    return EXIT_OK if report["passed"] else EXIT_RUNTIME


def cmd_fit(args) -> int:
    try:
        with open(args.samples) as fh:
            data = json.load(fh)
        samples = np.asarray(
            data["gamma_eff"] if isinstance(data, dict) else data, dtype=float)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: cannot read samples: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = fit_logsgn(samples)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    if args.out:
        report.to_json(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eesm-kit",
        description="EESM-log-SGN PHY abstraction under imperfect channel "
                    "estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file (defaults applied "
                                        "for missing keys)")
        p.add_argument("--snr-db", type=float, nargs="+", default=None,
                       help="SNR grid in dB")
        p.add_argument("--sigma-e", default=None,
                       help="estimation-error std dev, or 'rule' for "
                            "1/(n_t*SNR) variance")
        p.add_argument("--packets", type=int, default=None,
                       help="packets per SNR point")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker thread cap (results are identical for "
                            "any value)")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("simulate", help="run the simulation-based flow")
    add_common(p)
    p.add_argument("--beta", default=None,
                   help="EESM beta, or 'calibrate' (default from config)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="run the analysis-based flow")
    add_common(p)
    p.add_argument("--beta", type=float, default=None,
                   help="EESM beta from a simulation run")
    p.add_argument("--from-sim", default=None,
                   help="simulation output directory to take beta from and "
                        "compare against")
    p.add_argument("--mode", choices=["paper_literal", "consistent"],
                   default=None, help="analytical SINR mode")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", help="calibrate beta from a packet trace")
    p.add_argument("--trace", required=True, help="records JSONL file")
    p.add_argument("--ref", required=True, help="AWGN PER reference CSV")
    p.add_argument("--search", type=float, nargs=2, default=[0.05, 100.0],
                   help="beta search range")
    p.add_argument("--objective-mode", choices=["per_packet", "binned"],
                   default="per_packet")
    p.add_argument("--out", default=None, help="calibration JSON output path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="run a validation suite")
    p.add_argument("suite", choices=["lemma1", "oracles", "distribution-match"])
    p.add_argument("--packets", type=int, default=None)
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="report.json")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fit", help="fit the log-SGN law to a samples file")
    p.add_argument("--samples", required=True,
                   help="JSON array of positive linear effective SINRs "
                        "(or {'gamma_eff': [...]})")
    p.add_argument("--out", default=None, help="fit JSON output path")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, io.IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UninformativeDatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNINFORMATIVE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
