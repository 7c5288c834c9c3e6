"""Command-line front end: per-stage outputs plus a reference-comparison
report, all driven by one JSON config."""

from __future__ import annotations

import argparse
import csv
import json
import math
import secrets
import sys
from pathlib import Path

import numpy as np

from . import biphoton, cavity, fitting, measurement, photostats, polarization
from .config import ConfigError, ExperimentConfig, config_to_dict, default_config, load_config

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _write_json(path: Path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _write_table(path: Path, header, rows, fmt: str = "csv") -> None:
    """Tabular artifact in the requested format, fixed basename per command."""
    rows = [tuple(row) for row in rows]
    if fmt == "json":
        payload = {"columns": list(header), "rows": rows}
        _write_json(path.with_suffix(".json"), payload)
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _resolve_seed(args, cfg: ExperimentConfig):
    if getattr(args, "seed", None) is not None:
        return int(args.seed), "cli"
    if cfg.seed is not None:
        return int(cfg.seed), "config"
    return secrets.randbits(32), "generated"


def _state_from_config(cfg: ExperimentConfig) -> polarization.TwoPhotonState:
    return polarization.degraded_state(cfg.pump_phase_rad, cfg.coherence)


def _biphoton_params(cfg: ExperimentConfig):
    return (
        biphoton.BiphotonParams.from_cavity(cfg.ppktp0),
        biphoton.BiphotonParams.from_cavity(cfg.ppktp1),
    )


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_cavity(cfg, args, out: Path, seed, seed_source):
    span = args.span_ghz
    summary_specs = []
    for spec in (cfg.ppktp0, cfg.ppktp1):
        for pol in ("H", "V"):
            comb = cavity.build_mode_comb(spec, pol, span)
            _write_table(
                out / f"modes_{spec.name}_{pol}.csv",
                cavity.MODE_COMB_CSV_HEADER,
                comb.csv_rows(),
                args.format,
            )
        clusters = cavity.cluster_comb(spec, span)
        selected = cavity.dwdm_select(
            clusters, cfg.dwdm.center_offset_ghz, cfg.dwdm.width_ghz
        )
        _write_table(
            out / f"clusters_{spec.name}.csv",
            cavity.MODE_COMB_CSV_HEADER,
            clusters.csv_rows(),
            args.format,
        )
        summary_specs.append(
            {
                "name": spec.name,
                "cluster_spacing_ghz": cavity.cluster_spacing(
                    spec.fsr_h_ghz, spec.fsr_v_ghz
                ),
                "single_mode_margin_ghz": cavity.single_mode_margin(spec),
                "effective_index_h": cavity.effective_index(
                    spec.length_mm, spec.fsr_h_ghz
                ),
                "effective_index_v": cavity.effective_index(
                    spec.length_mm, spec.fsr_v_ghz
                ),
                "dwdm_selected_clusters": len(selected),
            }
        )
    _write_json(out / "cavity_summary.json", {"crystals": summary_specs})
    return EXIT_OK


def _cmd_biphoton(cfg, args, out: Path, seed, seed_source):
    bp0, bp1 = _biphoton_params(cfg)
    payload = {
        "crystals": [
            {
                "name": spec.name,
                "gamma_prime_mhz": biphoton.gamma_prime_mhz(bp),
                "t_fwhm_ns": biphoton.t_fwhm_ns(bp),
            }
            for spec, bp in ((cfg.ppktp0, bp0), (cfg.ppktp1, bp1))
        ],
        "spectral_overlap": biphoton.spectral_overlap(bp0, bp1),
    }
    _write_json(out / "biphoton.json", payload)
    return EXIT_OK


def _cmd_car(cfg, args, out: Path, seed, seed_source):
    powers = np.logspace(math.log10(0.5), math.log10(250.0), args.points)
    k = cfg.source.brightness_per_s_mw_mhz * cfg.source.bandwidth_mhz
    cars = [photostats.car_model(k * p, cfg.chain) for p in powers]
    _write_table(out / "car_curve.csv", ("power_mw", "car"), zip(powers, cars), args.format)

    summary = {
        "car_at_config_power": photostats.car_model(
            photostats.pair_rate(cfg.source), cfg.chain
        ),
    }
    if cfg.chain.dark_s_per_s > 0.0 and cfg.chain.dark_i_per_s > 0.0:
        optimum = photostats.car_optimal_rate(cfg.chain)
        summary["optimal_rate_pairs_per_s"] = optimum
        summary["optimal_power_mw"] = optimum / k
        summary["peak_car"] = photostats.car_model(optimum, cfg.chain)
    else:
        # without dark counts CAR decreases monotonically with rate
        summary["optimal_rate_pairs_per_s"] = None
    if args.fit_csv is not None:
        data = np.loadtxt(args.fit_csv, delimiter=",", skiprows=1)
        fit = fitting.fit_car_curve(data[:, 0], data[:, 1])
        _write_json(out / "car_fit.json", fit.to_json_payload())
        summary["fit"] = fit.to_json_payload()
    _write_json(out / "car_summary.json", summary)
    return EXIT_OK


def _cmd_simulate(cfg, args, out: Path, seed, seed_source):
    bp0, _ = _biphoton_params(cfg)
    stream = photostats.simulate_timetags(
        cfg.source, bp0, cfg.chain, args.duration, seed
    )
    photostats.write_ttag(stream, out / "timetags.ttag")
    hist = photostats.coincidence_histogram(
        stream, cfg.histogram_range_ns, cfg.chain.bin_ps
    )
    _write_table(out / "histogram.csv", photostats.HISTOGRAM_CSV_HEADER, hist.csv_rows(), args.format)

    rate = photostats.pair_rate(cfg.source)
    car_mc = photostats.car_from_stream(stream, cfg.chain, cfg.accidental_offset_ns)
    summary = {
        "duration_s": args.duration,
        "seed": seed,
        "seed_source": seed_source,
        "events": len(stream),
        "singles_ch0": int((stream.channel == 0).sum()),
        "singles_ch1": int((stream.channel == 1).sum()),
        "coincidences_window": photostats.count_coincidences(
            stream, 0.0, cfg.chain.window_ns
        ),
        "car_monte_carlo": car_mc if math.isfinite(car_mc) else "inf",
        "car_model": photostats.car_model(rate, cfg.chain),
    }
    fit = fitting.fit_exp_g2(hist)
    if fit.converged:
        summary["g2_fit"] = {
            "gamma_ghz": fit.parameters["gamma_ghz"],
            "t_fwhm_ns": fit.derived.get("t_fwhm_ns"),
            "t_fwhm_err_ns": fit.derived.get("t_fwhm_err_ns"),
        }
    _write_json(out / "simulate_summary.json", summary)
    return EXIT_OK


def _cmd_interference(cfg, args, out: Path, seed, seed_source):
    state = _state_from_config(cfg)
    beta = np.arange(0.0, 361.0, 7.5)
    rows = []
    visibilities = {}
    for alpha in (0.0, 45.0):
        curve = measurement.interference_curve(state, alpha, beta)
        rows.extend(
            (alpha, b, p) for b, p in zip(curve.beta_deg, curve.probs)
        )
        visibilities[f"visibility_{alpha:g}deg"] = curve.visibility
        visibilities[f"degenerate_{alpha:g}deg"] = curve.degenerate
    _write_table(
        out / "interference.csv", ("alpha_deg", "beta_deg", "probability"), rows,
        args.format,
    )
    _write_json(out / "interference.json", visibilities)
    return EXIT_OK


def _cmd_chsh(cfg, args, out: Path, seed, seed_source):
    state = _state_from_config(cfg)
    result = measurement.chsh_max(state)
    s_canonical = measurement.chsh_S(state, measurement.PHI_SETTINGS)

    # Poisson bootstrap of S at the optimizer settings, from simulated counts
    settings = result.settings
    projectors = measurement.bell_projector_settings(settings)
    rng = np.random.default_rng(seed)
    n = cfg.tomo_counts_per_setting
    counts = [
        int(rng.poisson(n * measurement.coincidence_prob(state, s)))
        for s in projectors
    ]
    values = np.empty(cfg.bootstrap_resamples)
    children = np.random.SeedSequence(seed).spawn(cfg.bootstrap_resamples)
    for i, child in enumerate(children):
        r = np.random.default_rng(child)
        values[i] = measurement.chsh_from_counts(r.poisson(counts))
    payload = {
        "seed": seed,
        "seed_source": seed_source,
        "s_max": result.s_value,
        "settings_deg": {
            "a": settings.a_deg,
            "a_prime": settings.a_prime_deg,
            "b": settings.b_deg,
            "b_prime": settings.b_prime_deg,
        },
        "s_at_phi_settings": s_canonical,
        "bootstrap": {
            "counts_per_setting": n,
            "resamples": cfg.bootstrap_resamples,
            "s_mean": float(values.mean()),
            "s_std": float(values.std(ddof=1)),
        },
    }
    _write_json(out / "chsh.json", payload)
    return EXIT_OK


def _cmd_tomo(cfg, args, out: Path, seed, seed_source):
    state = _state_from_config(cfg)
    record = measurement.tomo_simulate_counts(
        state, cfg.tomo_counts_per_setting, seed
    )
    record.to_csv(out / "counts.csv")
    rho_hat = measurement.tomo_mle(record)
    _write_json(out / "rho.json", measurement.rho_to_json_payload(rho_hat))

    target = polarization.entangled_ket(cfg.pump_phase_rad)
    boot = measurement.bootstrap_errors(
        record,
        cfg.bootstrap_resamples,
        lambda rec: measurement.fidelity(measurement.tomo_mle(rec), target),
        seed=seed,
    )
    _write_json(
        out / "tomo_summary.json",
        {
            "seed": seed,
            "seed_source": seed_source,
            "counts_per_setting": cfg.tomo_counts_per_setting,
            "fidelity_to_target": measurement.fidelity(rho_hat, target),
            "fidelity_bootstrap_mean": boot.mean,
            "fidelity_bootstrap_std": boot.std,
            "state_fidelity_to_model": measurement.state_fidelity(rho_hat, state),
        },
    )
    return EXIT_OK


def _report_rows(cfg: ExperimentConfig):
    tol = cfg.tolerances
    bp0, bp1 = _biphoton_params(cfg)
    state = _state_from_config(cfg)
    c = cfg.coherence
    target = polarization.entangled_ket(cfg.pump_phase_rad)

    rows = []

    def add(name, computed, reference, tolerance, kind):
        if kind == "rel":
            ok = abs(computed - reference) <= tolerance * abs(reference)
        elif kind == "abs":
            ok = abs(computed - reference) <= tolerance
        else:  # lower bound
            ok = computed > reference
        rows.append(
            {
                "quantity": name,
                "computed": computed,
                "reference": reference,
                "tolerance": tolerance,
                "kind": kind,
                "passed": bool(ok),
            }
        )

    add(
        "cluster_spacing_ppktp0_ghz",
        cavity.cluster_spacing(cfg.ppktp0.fsr_h_ghz, cfg.ppktp0.fsr_v_ghz),
        1060.0,
        tol["cluster_spacing_rel"],
        "rel",
    )
    add(
        "cluster_spacing_ppktp1_ghz",
        cavity.cluster_spacing(cfg.ppktp1.fsr_h_ghz, cfg.ppktp1.fsr_v_ghz),
        1260.0,
        tol["cluster_spacing_rel"],
        "rel",
    )
    add("t_fwhm_ppktp0_ns", biphoton.t_fwhm_ns(bp0), 0.483, tol["t_fwhm_rel"], "rel")
    add("t_fwhm_ppktp1_ns", biphoton.t_fwhm_ns(bp1), 0.550, tol["t_fwhm_rel"], "rel")
    add(
        "spectral_overlap",
        biphoton.spectral_overlap(bp0, bp1),
        0.879,
        tol["overlap_abs"],
        "abs",
    )
    add(
        "single_mode_margin_ppktp0_ghz",
        cavity.single_mode_margin(cfg.ppktp0),
        0.0,
        0.0,
        "bound",
    )
    add(
        "single_mode_margin_ppktp1_ghz",
        cavity.single_mode_margin(cfg.ppktp1),
        0.0,
        0.0,
        "bound",
    )

    v0 = measurement.interference_curve(state, 0.0, np.arange(0.0, 361.0, 15.0))
    v45 = measurement.interference_curve(state, 45.0, np.arange(0.0, 361.0, 15.0))
    add("visibility_0deg", v0.visibility, 1.0, tol["visibility_abs"], "abs")
    add("visibility_45deg", v45.visibility, c, tol["visibility_abs"], "abs")

    add(
        "chsh_s_at_phi_settings",
        measurement.chsh_S(state, measurement.PHI_SETTINGS),
        math.sqrt(2.0) * (1.0 + c),
        tol["chsh_abs"],
        "abs",
    )
    add(
        "chsh_s_max",
        measurement.chsh_max(state).s_value,
        2.0 * math.sqrt(1.0 + c * c),
        tol["chsh_abs"],
        "abs",
    )
    add(
        "fidelity_to_target",
        measurement.fidelity(state, target),
        (1.0 + c) / 2.0,
        tol["fidelity_abs"],
        "abs",
    )
    add(
        "car_model_at_config_power",
        photostats.car_model(photostats.pair_rate(cfg.source), cfg.chain),
        6000.0,
        0.0,
        "bound",
    )

    net = cfg.network if cfg.network is not None else polarization.displacer_network()
    ideal = polarization.propagate_network(net, cfg.pump_phase_rad)
    frob = float(
        np.linalg.norm(
            ideal.rho - polarization.degraded_state(cfg.pump_phase_rad, 1.0).rho
        )
    )
    rows.append(
        {
            "quantity": "network_vs_ideal_frobenius",
            "computed": frob,
            "reference": 1e-10,
            "tolerance": 0.0,
            "kind": "upper",
            "passed": bool(frob < 1e-10),
        }
    )
    return rows


def _cmd_report(cfg, args, out: Path, seed, seed_source):
    rows = _report_rows(cfg)
    if args.format == "csv":
        # the JSON summary below already carries every row
        _write_table(
            out / "report.csv",
            ("quantity", "computed", "reference", "tolerance", "kind", "passed"),
            [
                (
                    r["quantity"],
                    r["computed"],
                    r["reference"],
                    r["tolerance"],
                    r["kind"],
                    r["passed"],
                )
                for r in rows
            ],
        )
    _write_json(
        out / "report.json",
        {"rows": rows, "all_passed": all(r["passed"] for r in rows)},
    )
    width = max(len(r["quantity"]) for r in rows)
    for r in rows:
        status = "PASS" if r["passed"] else "FAIL"
        print(
            f"{r['quantity']:<{width}}  {r['computed']:>14.6g}  "
            f"ref {r['reference']:>10.6g}  [{status}]"
        )
    print("overall:", "PASS" if all(r["passed"] for r in rows) else "FAIL")
    return EXIT_OK


_COMMANDS = {
    "cavity": _cmd_cavity,
    "biphoton": _cmd_biphoton,
    "car": _cmd_car,
    "simulate": _cmd_simulate,
    "interference": _cmd_interference,
    "chsh": _cmd_chsh,
    "tomo": _cmd_tomo,
    "report": _cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavityspdc",
        description="Monolithic-cavity photon-pair source simulation toolkit",
    )
    parser.add_argument("--config", type=Path, default=None, help="JSON config path")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed")
    parser.add_argument(
        "--out", type=Path, default=Path("out"), help="output directory"
    )
    parser.add_argument(
        "--format", choices=("csv", "json"), default="csv",
        help="preferred tabular format (JSON summaries are always written)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cavity", help="mode combs, margins, cluster spacings")
    p.add_argument("--span-ghz", type=float, default=240.0)
    sub.add_parser("biphoton", help="bandwidths, correlation widths, overlap")
    p = sub.add_parser("car", help="CAR model curve and optional fit")
    p.add_argument("--points", type=int, default=60)
    p.add_argument("--fit-csv", type=Path, default=None,
                   help="CSV of (power_mw, car) samples to fit")
    p = sub.add_parser("simulate", help="time-tag Monte Carlo plus histogram")
    p.add_argument("--duration", type=float, default=1.0, help="seconds")
    sub.add_parser("interference", help="polarization interference curves")
    sub.add_parser("chsh", help="CHSH S, optimal settings, bootstrap error")
    sub.add_parser("tomo", help="simulate counts, reconstruct, fidelity")
    sub.add_parser("report", help="reference comparison table")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = default_config() if args.config is None else load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    seed, seed_source = _resolve_seed(args, cfg)
    try:
        code = _COMMANDS[args.command](cfg, args, out, seed, seed_source)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _write_json(
        out / "metadata.json",
        {
            "command": args.command,
            "seed": seed,
            "seed_source": seed_source,
            "config": config_to_dict(cfg),
        },
    )
    return code


if __name__ == "__main__":
    sys.exit(main())
