#!/usr/bin/env python3
"""CAR versus pump power: analytic curve, Monte Carlo spot checks, and a fit
of the noisy model samples."""

import argparse
import csv
from pathlib import Path

import numpy as np

from cavityspdc import (
    count_coincidences,
    BiphotonParams,
    SourceRate,
    car_from_stream,
    car_model,
    default_config,
    fit_car_curve,
    simulate_timetags,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=40)
    parser.add_argument("--mc-powers", type=float, nargs="*", default=[2.5, 25.0, 150.0])
    parser.add_argument("--mc-duration", type=float, default=20.0, help="seconds")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", type=Path, default=Path("out/car"))
    args = parser.parse_args()

    cfg = default_config()
    bp = BiphotonParams.from_cavity(cfg.ppktp0)
    k = cfg.source.brightness_per_s_mw_mhz * cfg.source.bandwidth_mhz
    powers = np.logspace(np.log10(0.5), np.log10(250.0), args.points)
    cars = np.array([car_model(k * p, cfg.chain) for p in powers])

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "car_model.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("power_mw", "car"))
        writer.writerows(zip(powers, cars))

    fit = fit_car_curve(powers, cars)
    print(
        f"model peak: {fit.derived['peak_car']:.3g} at "
        f"{fit.derived['peak_power_mw']:.2f} mW"
    )

    for power in args.mc_powers:
        src = SourceRate(cfg.source.brightness_per_s_mw_mhz, power, cfg.source.bandwidth_mhz)
        stream = simulate_timetags(src, bp, cfg.chain, args.mc_duration, args.seed)
        mc = car_from_stream(stream, cfg.chain, cfg.accidental_offset_ns)
        peak = count_coincidences(stream, 0.0, cfg.chain.window_ns)
        acc = count_coincidences(stream, cfg.accidental_offset_ns, cfg.chain.window_ns)
        print(f"{power:7.1f} mW: model {car_model(k * power, cfg.chain):10.1f}  "
              f"monte-carlo {mc:10.1f}  ({peak} peak / {acc} accidental counts)")


if __name__ == "__main__":
    main()
