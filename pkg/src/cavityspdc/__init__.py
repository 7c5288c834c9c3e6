"""Simulation and estimation toolkit for monolithic-cavity photon-pair
sources: mode structure, biphoton statistics, coincidence counting,
beam-displacer state synthesis, and entanglement characterization."""

from .biphoton import (
    BiphotonParams,
    g2_model,
    gamma_prime_mhz,
    spectral_overlap,
    t_fwhm_ns,
)
from .cavity import (
    CavitySpec,
    Mode,
    ModeComb,
    airy_transmission,
    build_mode_comb,
    cluster_comb,
    cluster_spacing,
    dwdm_select,
    effective_index,
    single_mode_margin,
    vernier_pairs,
)
from .config import ExperimentConfig, default_config, load_config, save_config
from .fitting import FitResult, fit_car_curve, fit_exp_g2, fit_lorentzian
from .measurement import (
    BellSettings,
    PHI_SETTINGS,
    ProjectorSetting,
    TomographyRecord,
    bootstrap_errors,
    chsh_S,
    chsh_max,
    coincidence_prob,
    correlation_E,
    fidelity,
    interference_curve,
    state_fidelity,
    tomo_linear,
    tomo_mle,
    tomo_simulate_counts,
)
from .photostats import (
    DetectionChain,
    Histogram,
    SourceRate,
    TimeTagStream,
    car_from_stream,
    car_model,
    car_optimal_rate,
    coincidence_histogram,
    count_coincidences,
    pair_rate,
    read_ttag,
    simulate_timetags,
    write_ttag,
)
from .polarization import (
    BD,
    HWP,
    QWP,
    CrystalSource,
    ElementNet,
    Mirror,
    NonInterferingNetworkError,
    PathPolState,
    TwoPhotonState,
    concurrence,
    degraded_state,
    displacer_network,
    entangled_ket,
    hwp_matrix,
    propagate_network,
    qwp_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "BD",
    "BellSettings",
    "BiphotonParams",
    "CavitySpec",
    "CrystalSource",
    "DetectionChain",
    "ElementNet",
    "ExperimentConfig",
    "FitResult",
    "HWP",
    "Histogram",
    "Mirror",
    "Mode",
    "ModeComb",
    "NonInterferingNetworkError",
    "PHI_SETTINGS",
    "PathPolState",
    "ProjectorSetting",
    "QWP",
    "SourceRate",
    "TimeTagStream",
    "TomographyRecord",
    "TwoPhotonState",
    "airy_transmission",
    "bootstrap_errors",
    "build_mode_comb",
    "car_from_stream",
    "car_model",
    "car_optimal_rate",
    "chsh_S",
    "chsh_max",
    "cluster_comb",
    "cluster_spacing",
    "coincidence_histogram",
    "coincidence_prob",
    "concurrence",
    "correlation_E",
    "count_coincidences",
    "default_config",
    "degraded_state",
    "displacer_network",
    "dwdm_select",
    "effective_index",
    "entangled_ket",
    "fidelity",
    "fit_car_curve",
    "fit_exp_g2",
    "fit_lorentzian",
    "g2_model",
    "gamma_prime_mhz",
    "hwp_matrix",
    "interference_curve",
    "load_config",
    "pair_rate",
    "propagate_network",
    "qwp_matrix",
    "read_ttag",
    "save_config",
    "simulate_timetags",
    "single_mode_margin",
    "spectral_overlap",
    "state_fidelity",
    "t_fwhm_ns",
    "tomo_linear",
    "tomo_mle",
    "tomo_simulate_counts",
    "vernier_pairs",
    "write_ttag",
]
