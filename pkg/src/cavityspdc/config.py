"""Experiment configuration: JSON with units baked into every key name."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .cavity import CavitySpec
from .photostats import DetectionChain, SourceRate
from .polarization import BD, HWP, QWP, CrystalSource, ElementNet, Mirror


class ConfigError(ValueError):
    """Invalid configuration; the message carries the offending field path."""


@dataclass(frozen=True)
class DwdmFilter:
    center_offset_ghz: float = 0.0
    width_ghz: float = 200.0

    def __post_init__(self):
        if self.width_ghz <= 0.0:
            raise ConfigError("dwdm.width_ghz must be > 0")


#: Reference tolerances used by the comparison report.
DEFAULT_TOLERANCES = {
    "cluster_spacing_rel": 0.01,
    "t_fwhm_rel": 0.005,
    "overlap_abs": 0.005,
    "chsh_abs": 1e-3,
    "visibility_abs": 1e-6,
    "fidelity_abs": 1e-6,
}


@dataclass(frozen=True)
class ExperimentConfig:
    ppktp0: CavitySpec
    ppktp1: CavitySpec
    source: SourceRate
    chain: DetectionChain
    dwdm: DwdmFilter
    pump_phase_rad: float
    coherence: float
    seed: int | None
    tomo_counts_per_setting: int
    bootstrap_resamples: int
    accidental_offset_ns: float
    histogram_range_ns: float
    network: ElementNet | None
    tolerances: dict

    def __post_init__(self):
        if not math.isfinite(self.pump_phase_rad):
            raise ConfigError("pump_phase_rad must be finite")
        if not 0.0 <= self.coherence <= 1.0:
            raise ConfigError("coherence must lie in [0, 1]")
        if self.tomo_counts_per_setting <= 0:
            raise ConfigError("tomo_counts_per_setting must be > 0")
        if self.bootstrap_resamples < 100:
            raise ConfigError("bootstrap_resamples must be >= 100")
        if self.accidental_offset_ns <= 2.0 * self.chain.window_ns:
            raise ConfigError("accidental_offset_ns must far exceed the window")
        if self.histogram_range_ns <= 0.0:
            raise ConfigError("histogram_range_ns must be > 0")


def default_config() -> ExperimentConfig:
    """Bundled two-crystal telecom source description."""
    return ExperimentConfig(
        ppktp0=CavitySpec(
            name="ppktp0",
            fsr_h_ghz=57.91,
            fsr_v_ghz=54.91,
            fwhm_h_mhz=454.0,
            fwhm_v_mhz=462.0,
            degenerate_freq_thz=193.3895,
            pm_fwhm_thz=2.04,
            length_mm=1.47,
            out_coupler_reflectivity=0.96,
            poling_period_um=46.2,
        ),
        ppktp1=CavitySpec(
            name="ppktp1",
            fsr_h_ghz=57.41,
            fsr_v_ghz=54.91,
            fwhm_h_mhz=422.0,
            fwhm_v_mhz=384.0,
            degenerate_freq_thz=193.3895,
            pm_fwhm_thz=2.04,
            length_mm=1.47,
            out_coupler_reflectivity=0.96,
            poling_period_um=46.2,
        ),
        source=SourceRate(
            brightness_per_s_mw_mhz=0.7, power_mw=150.0, bandwidth_mhz=458.0
        ),
        chain=DetectionChain(
            eta_s=0.125,
            eta_i=0.125,
            dark_s_per_s=100.0,
            dark_i_per_s=100.0,
            window_ns=3.2,
            jitter_sigma_ps=60.0,
            bin_ps=25.0,
        ),
        dwdm=DwdmFilter(center_offset_ghz=0.0, width_ghz=200.0),
        pump_phase_rad=math.pi,
        coherence=0.8709,
        seed=None,
        tomo_counts_per_setting=10_000,
        bootstrap_resamples=200,
        accidental_offset_ns=50.0,
        histogram_range_ns=20.0,
        network=None,
        tolerances=dict(DEFAULT_TOLERANCES),
    )


# ---------------------------------------------------------------------------
# JSON round trip

_ELEMENT_TYPES = {"bd": BD, "hwp": HWP, "qwp": QWP, "mirror": Mirror,
                  "crystal": CrystalSource}


def _element_to_dict(element) -> dict:
    for name, cls in _ELEMENT_TYPES.items():
        if isinstance(element, cls):
            payload = {"type": name}
            payload.update(dataclasses.asdict(element))
            if payload.get("rail") is not None:
                payload["rail"] = list(payload["rail"])
            return payload
    raise ConfigError(f"unknown network element {element!r}")


def _element_from_dict(payload: dict, path: str):
    if "type" not in payload:
        raise ConfigError(f"{path}.type is required")
    kind = payload["type"]
    cls = _ELEMENT_TYPES.get(kind)
    if cls is None:
        raise ConfigError(f"{path}.type: unknown element type {kind!r}")
    kwargs = {k: v for k, v in payload.items() if k != "type"}
    if kwargs.get("rail") is not None:
        rail = kwargs["rail"]
        if not (isinstance(rail, (list, tuple)) and len(rail) == 2):
            raise ConfigError(f"{path}.rail must be a two-element list")
        kwargs["rail"] = (int(rail[0]), int(rail[1]))
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _build(cls, payload: dict, path: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected an object")
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - fields
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown key")
    try:
        return cls(**payload)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_TOP_LEVEL_KEYS = {
    "ppktp0", "ppktp1", "source", "chain", "dwdm", "pump_phase_rad",
    "coherence", "seed", "tomo_counts_per_setting", "bootstrap_resamples",
    "accidental_offset_ns", "histogram_range_ns", "network", "tolerances",
}


def config_from_dict(payload: dict) -> ExperimentConfig:
    if not isinstance(payload, dict):
        raise ConfigError("config: expected a JSON object")
    unknown = set(payload) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"config.{sorted(unknown)[0]}: unknown key")
    base = default_config()
    kwargs = {}
    for key in ("ppktp0", "ppktp1"):
        if key in payload:
            kwargs[key] = _build(CavitySpec, payload[key], f"config.{key}")
    if "source" in payload:
        kwargs["source"] = _build(SourceRate, payload["source"], "config.source")
    if "chain" in payload:
        kwargs["chain"] = _build(DetectionChain, payload["chain"], "config.chain")
    if "dwdm" in payload:
        kwargs["dwdm"] = _build(DwdmFilter, payload["dwdm"], "config.dwdm")
    if "network" in payload and payload["network"] is not None:
        elements = payload["network"]
        if not isinstance(elements, list):
            raise ConfigError("config.network: expected a list of elements")
        kwargs["network"] = ElementNet(
            tuple(
                _element_from_dict(e, f"config.network[{i}]")
                for i, e in enumerate(elements)
            )
        )
    if "tolerances" in payload:
        tol = dict(DEFAULT_TOLERANCES)
        for key, value in payload["tolerances"].items():
            if key not in DEFAULT_TOLERANCES:
                raise ConfigError(f"config.tolerances.{key}: unknown key")
            tol[key] = float(value)
        kwargs["tolerances"] = tol
    for key in (
        "pump_phase_rad", "coherence", "seed", "tomo_counts_per_setting",
        "bootstrap_resamples", "accidental_offset_ns", "histogram_range_ns",
    ):
        if key in payload:
            kwargs[key] = payload[key]
    try:
        return dataclasses.replace(base, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from exc


def config_to_dict(cfg: ExperimentConfig) -> dict:
    payload = {
        "ppktp0": dataclasses.asdict(cfg.ppktp0),
        "ppktp1": dataclasses.asdict(cfg.ppktp1),
        "source": dataclasses.asdict(cfg.source),
        "chain": dataclasses.asdict(cfg.chain),
        "dwdm": dataclasses.asdict(cfg.dwdm),
        "pump_phase_rad": cfg.pump_phase_rad,
        "coherence": cfg.coherence,
        "seed": cfg.seed,
        "tomo_counts_per_setting": cfg.tomo_counts_per_setting,
        "bootstrap_resamples": cfg.bootstrap_resamples,
        "accidental_offset_ns": cfg.accidental_offset_ns,
        "histogram_range_ns": cfg.histogram_range_ns,
        "network": (
            None
            if cfg.network is None
            else [_element_to_dict(e) for e in cfg.network.elements]
        ),
        "tolerances": dict(cfg.tolerances),
    }
    return payload


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    try:
        return config_from_dict(payload)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")
