#!/usr/bin/env python3
"""Synthesize a noisy transmission sweep across one cavity line per
polarization and recover the linewidths with the Lorentzian fitter."""

import argparse
import csv
from pathlib import Path

import numpy as np

from cavityspdc import airy_transmission, default_config, fit_lorentzian


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--crystal", choices=("ppktp0", "ppktp1"), default="ppktp0")
    parser.add_argument("--noise", type=float, default=0.02, help="additive RMS noise")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("out/sweeps"))
    args = parser.parse_args()

    cfg = default_config()
    spec = getattr(cfg, args.crystal)
    rng = np.random.default_rng(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)

    for pol in ("H", "V"):
        fsr = spec.fsr_ghz(pol)
        fwhm = spec.fwhm_mhz(pol)
        detuning_mhz = np.linspace(-3.0 * fwhm, 3.0 * fwhm, 400)
        trans = airy_transmission(detuning_mhz * 1e-3, fsr, fwhm)
        noisy = trans + rng.normal(0.0, args.noise, trans.size)

        fit = fit_lorentzian(detuning_mhz, noisy)
        path = args.out / f"sweep_{spec.name}_{pol}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("detuning_mhz", "transmission", "fit"))
            from cavityspdc.fitting import lorentzian

            model = lorentzian(detuning_mhz, *(fit.parameters[k] for k in
                                               ("center", "fwhm", "amplitude", "offset")))
            writer.writerows(zip(detuning_mhz, noisy, model))
        print(
            f"{spec.name} {pol}: true fwhm {fwhm:7.1f} MHz, fitted "
            f"{fit.parameters['fwhm']:7.1f} +- {fit.errors['fwhm']:.1f} MHz -> {path}"
        )


if __name__ == "__main__":
    main()
