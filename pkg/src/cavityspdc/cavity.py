"""Fabry-Perot mode combs, Vernier cluster analysis, and spectral filtering
for birefringent monolithic cavities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT_M_PER_S = 299_792_458.0

POLARIZATIONS = ("H", "V")
JOINT_POL = "HV"  # paired signal/idler cluster modes


def _require_positive(**values):
    for name, value in values.items():
        if not math.isfinite(value) or value <= 0.0:
            raise ValueError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class CavitySpec:
    """Static description of one birefringent monolithic cavity.

    Frequencies carry their unit in the field name; mode offsets everywhere
    are relative to the degeneracy frequency, never absolute optical
    frequencies.
    """

    name: str
    fsr_h_ghz: float
    fsr_v_ghz: float
    fwhm_h_mhz: float
    fwhm_v_mhz: float
    degenerate_freq_thz: float
    pm_fwhm_thz: float
    length_mm: float
    out_coupler_reflectivity: float
    poling_period_um: float  # metadata only, never used in computations

    def __post_init__(self):
        _require_positive(
            fsr_h_ghz=self.fsr_h_ghz,
            fsr_v_ghz=self.fsr_v_ghz,
            fwhm_h_mhz=self.fwhm_h_mhz,
            fwhm_v_mhz=self.fwhm_v_mhz,
            degenerate_freq_thz=self.degenerate_freq_thz,
            pm_fwhm_thz=self.pm_fwhm_thz,
            length_mm=self.length_mm,
            poling_period_um=self.poling_period_um,
        )
        if self.fwhm_h_mhz >= self.fsr_h_ghz * 1e3:
            raise ValueError(f"{self.name}: fwhm_h must be below fsr_h")
        if self.fwhm_v_mhz >= self.fsr_v_ghz * 1e3:
            raise ValueError(f"{self.name}: fwhm_v must be below fsr_v")
        if not 0.0 < self.out_coupler_reflectivity < 1.0:
            raise ValueError(
                f"{self.name}: out_coupler_reflectivity must lie in (0, 1)"
            )

    def fsr_ghz(self, pol: str) -> float:
        if pol == "H":
            return self.fsr_h_ghz
        if pol == "V":
            return self.fsr_v_ghz
        raise ValueError(f"unknown polarization {pol!r}")

    def fwhm_mhz(self, pol: str) -> float:
        if pol == "H":
            return self.fwhm_h_mhz
        if pol == "V":
            return self.fwhm_v_mhz
        raise ValueError(f"unknown polarization {pol!r}")

    def mean_linewidth_mhz(self) -> float:
        return 0.5 * (self.fwhm_h_mhz + self.fwhm_v_mhz)


@dataclass(frozen=True)
class Mode:
    index: int
    offset_ghz: float
    linewidth_mhz: float
    pol: str


@dataclass(frozen=True)
class ModeComb:
    """Ordered set of cavity modes, offsets relative to degeneracy."""

    modes: tuple[Mode, ...]

    def __post_init__(self):
        by_pol: dict[str, list[float]] = {}
        for m in self.modes:
            by_pol.setdefault(m.pol, []).append(m.offset_ghz)
        for pol, offsets in by_pol.items():
            if any(b <= a for a, b in zip(offsets, offsets[1:])):
                raise ValueError(
                    f"mode centers must be strictly increasing for pol {pol}"
                )

    def __len__(self):
        return len(self.modes)

    def offsets_ghz(self) -> np.ndarray:
        return np.array([m.offset_ghz for m in self.modes], dtype=float)

    def csv_rows(self):
        """Rows matching the (index, offset_GHz, linewidth_MHz, pol) export."""
        return [
            (m.index, m.offset_ghz, m.linewidth_mhz, m.pol) for m in self.modes
        ]


MODE_COMB_CSV_HEADER = ("index", "offset_GHz", "linewidth_MHz", "pol")


def airy_transmission(detuning_ghz, fsr_ghz: float, fwhm_mhz: float):
    """Airy transmission T(detuning) of a lossless two-mirror resonator.

    T = 1 / (1 + (2F/pi)^2 sin^2(pi * detuning / fsr)) with finesse
    F = fsr / fwhm. Accepts scalar or array detuning.
    """
    _require_positive(fsr_ghz=fsr_ghz, fwhm_mhz=fwhm_mhz)
    if fwhm_mhz >= fsr_ghz * 1e3:
        raise ValueError("fwhm must be below one free spectral range")
    detuning_ghz = np.asarray(detuning_ghz, dtype=float)
    if not np.all(np.isfinite(detuning_ghz)):
        raise ValueError("detuning must be finite")
    finesse = fsr_ghz / (fwhm_mhz * 1e-3)
    s = np.sin(np.pi * detuning_ghz / fsr_ghz)
    out = 1.0 / (1.0 + (2.0 * finesse / np.pi) ** 2 * s * s)
    return float(out) if out.ndim == 0 else out


def build_mode_comb(spec: CavitySpec, pol: str, span_ghz: float) -> ModeComb:
    """Mode comb of one polarization over +-span/2 around degeneracy."""
    _require_positive(span_ghz=span_ghz)
    fsr = spec.fsr_ghz(pol)
    fwhm = spec.fwhm_mhz(pol)
    k_max = int(math.floor(span_ghz / (2.0 * fsr)))
    modes = tuple(
        Mode(index=k, offset_ghz=k * fsr, linewidth_mhz=fwhm, pol=pol)
        for k in range(-k_max, k_max + 1)
    )
    return ModeComb(modes)


def cluster_spacing(fsr_s_ghz: float, fsr_i_ghz: float) -> float:
    """Vernier period of two interleaved combs: fsr_s*fsr_i/|fsr_s - fsr_i|."""
    _require_positive(fsr_s_ghz=fsr_s_ghz, fsr_i_ghz=fsr_i_ghz)
    if fsr_s_ghz == fsr_i_ghz:
        raise ValueError("degenerate Vernier: infinite cluster spacing")
    return fsr_s_ghz * fsr_i_ghz / abs(fsr_s_ghz - fsr_i_ghz)


def single_mode_margin(spec: CavitySpec) -> float:
    """|fsr_h - fsr_v| minus the mean linewidth, in GHz.

    Positive margin means at most one joint longitudinal mode per cluster.
    """
    return abs(spec.fsr_h_ghz - spec.fsr_v_ghz) - spec.mean_linewidth_mhz() * 1e-3


def dwdm_select(comb: ModeComb, center_offset_ghz: float, width_ghz: float) -> ModeComb:
    """Modes whose centers fall inside a rectangular passband."""
    _require_positive(width_ghz=width_ghz)
    half = 0.5 * width_ghz
    kept = tuple(
        m for m in comb.modes if abs(m.offset_ghz - center_offset_ghz) <= half
    )
    return ModeComb(kept)


def effective_index(length_mm: float, fsr_ghz: float) -> float:
    """Group index implied by a standing-wave FSR: c0 / (2 * L * FSR)."""
    _require_positive(length_mm=length_mm, fsr_ghz=fsr_ghz)
    return SPEED_OF_LIGHT_M_PER_S / (2.0 * length_mm * 1e-3 * fsr_ghz * 1e9)


def cluster_comb(spec: CavitySpec, span_ghz: float) -> ModeComb:
    """Comb of joint signal/idler cluster centers over +-span/2.

    Cluster centers sit at integer multiples of the Vernier spacing of the
    H and V combs; each entry carries the mean linewidth and the joint
    polarization tag.
    """
    _require_positive(span_ghz=span_ghz)
    spacing = cluster_spacing(spec.fsr_h_ghz, spec.fsr_v_ghz)
    k_max = int(math.floor(span_ghz / (2.0 * spacing)))
    width = spec.mean_linewidth_mhz()
    modes = tuple(
        Mode(index=k, offset_ghz=k * spacing, linewidth_mhz=width, pol=JOINT_POL)
        for k in range(-k_max, k_max + 1)
    )
    return ModeComb(modes)


def vernier_pairs(
    comb_h: ModeComb, comb_v: ModeComb, tol_ghz: float | None = None
) -> list[tuple[Mode, Mode]]:
    """H/V mode pairs whose offsets agree within a tolerance.

    Default tolerance is half the mean linewidth of the two combs, which
    realizes the joint-resonance condition numerically.  For realistic
    birefringent FSR splittings only the degenerate pair survives; the
    approximate realignments one Vernier period away miss by several
    linewidths and are rejected.
    """
    if tol_ghz is None:
        widths = [m.linewidth_mhz for m in comb_h.modes + comb_v.modes]
        if not widths:
            return []
        tol_ghz = 0.5 * float(np.mean(widths)) * 1e-3
    if tol_ghz <= 0:
        raise ValueError("tol_ghz must be > 0")
    pairs = []
    v_offsets = comb_v.offsets_ghz()
    for mh in comb_h.modes:
        if v_offsets.size == 0:
            break
        j = int(np.argmin(np.abs(v_offsets - mh.offset_ghz)))
        if abs(v_offsets[j] - mh.offset_ghz) <= tol_ghz:
            pairs.append((mh, comb_v.modes[j]))
    return pairs


def phase_matching_envelope(offset_ghz, spec: CavitySpec, shape: str = "gaussian"):
    """Relative phase-matching intensity at an offset from degeneracy.

    Only the FWHM is contractual; the shape is configurable because the
    underlying profile is not pinned down by the source characterization.
    """
    offset = np.asarray(offset_ghz, dtype=float)
    fwhm_ghz = spec.pm_fwhm_thz * 1e3
    if shape == "gaussian":
        out = np.exp(-4.0 * math.log(2.0) * (offset / fwhm_ghz) ** 2)
    elif shape == "sinc2":
        # sinc^2(u) falls to 1/2 at u = 0.442946..., so scale the argument
        # to put the half maximum at fwhm/2.
        half_u = 0.4429464706890664
        out = np.sinc(offset / fwhm_ghz * 2.0 * half_u) ** 2
    else:
        raise ValueError(f"unknown envelope shape {shape!r}")
    return float(out) if out.ndim == 0 else out
