"""Pair rates, the CAR model, and Monte Carlo generation and analysis of
detector time-tag streams (jitter, dark counts, coincidence windows)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .biphoton import BiphotonParams, coherence_scale_ps

TTAG_MAGIC = b"TTAG1\x00"
_TTAG_DTYPE = np.dtype([("t", "<u8"), ("ch", "u1")])


@dataclass(frozen=True)
class SourceRate:
    """Spectral brightness model: pairs/s = brightness * power * bandwidth."""

    brightness_per_s_mw_mhz: float
    power_mw: float
    bandwidth_mhz: float

    def __post_init__(self):
        for name in ("brightness_per_s_mw_mhz", "power_mw", "bandwidth_mhz"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class DetectionChain:
    """Per-arm efficiencies, dark rates, and timing parameters."""

    eta_s: float
    eta_i: float
    dark_s_per_s: float
    dark_i_per_s: float
    window_ns: float
    jitter_sigma_ps: float
    bin_ps: float

    def __post_init__(self):
        for name in ("eta_s", "eta_i"):
            eta = getattr(self, name)
            if not 0.0 <= eta <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {eta!r}")
        for name in ("dark_s_per_s", "dark_i_per_s", "jitter_sigma_ps"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        if self.window_ns <= 0.0:
            raise ValueError("window_ns must be > 0")
        if self.bin_ps <= 0.0:
            raise ValueError("bin_ps must be > 0")


class TimeTagStream:
    """Channel-tagged event list, timestamps in integer picoseconds."""

    __slots__ = ("t_ps", "channel")

    def __init__(self, t_ps, channel):
        t_ps = np.asarray(t_ps, dtype=np.int64)
        channel = np.asarray(channel, dtype=np.uint8)
        if t_ps.shape != channel.shape or t_ps.ndim != 1:
            raise ValueError("t_ps and channel must be matching 1-d arrays")
        if channel.size and channel.max() > 1:
            raise ValueError("channel must be 0 or 1")
        if t_ps.size > 1 and np.any(np.diff(t_ps) < 0):
            raise ValueError("timestamps must be non-decreasing")
        self.t_ps = t_ps
        self.channel = channel

    def __len__(self):
        return self.t_ps.size

    def channel_times(self, ch: int) -> np.ndarray:
        return self.t_ps[self.channel == ch]

    def translated(self, dt_ps: int) -> "TimeTagStream":
        return TimeTagStream(self.t_ps + int(dt_ps), self.channel.copy())

    def __eq__(self, other):
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return np.array_equal(self.t_ps, other.t_ps) and np.array_equal(
            self.channel, other.channel
        )


def write_ttag(stream: TimeTagStream, path) -> None:
    """Binary export: magic 'TTAG1\\0', then (u64 timestamp_ps, u8 channel)."""
    if stream.t_ps.size and stream.t_ps.min() < 0:
        raise ValueError("negative timestamps cannot be stored; translate first")
    records = np.empty(stream.t_ps.size, dtype=_TTAG_DTYPE)
    records["t"] = stream.t_ps.astype(np.uint64)
    records["ch"] = stream.channel
    with open(path, "wb") as fh:
        fh.write(TTAG_MAGIC)
        fh.write(records.tobytes())


def read_ttag(path) -> TimeTagStream:
    data = Path(path).read_bytes()
    if not data.startswith(TTAG_MAGIC):
        raise ValueError(f"{path}: not a TTAG1 file")
    body = data[len(TTAG_MAGIC):]
    if len(body) % _TTAG_DTYPE.itemsize:
        raise ValueError(f"{path}: truncated record")
    records = np.frombuffer(body, dtype=_TTAG_DTYPE)
    return TimeTagStream(records["t"].astype(np.int64), records["ch"])


def pair_rate(src: SourceRate) -> float:
    """Generated pair rate in pairs/s."""
    return src.brightness_per_s_mw_mhz * src.power_mw * src.bandwidth_mhz


def car_model(rate: float, chain: DetectionChain) -> float:
    """Coincidence-to-accidental ratio for a CW pair source.

    Coincidence rate C = eta_s * eta_i * rate; accidental rate
    A = (eta_s*rate + dark_s) * (eta_i*rate + dark_i) * window.
    """
    if not math.isfinite(rate) or rate < 0.0:
        raise ValueError(f"rate must be finite and >= 0, got {rate!r}")
    coincidences = chain.eta_s * chain.eta_i * rate
    accidentals = (
        (chain.eta_s * rate + chain.dark_s_per_s)
        * (chain.eta_i * rate + chain.dark_i_per_s)
        * chain.window_ns
        * 1e-9
    )
    if accidentals == 0.0:
        raise ValueError("no accidentals: CAR undefined for zero rate and darks")
    return coincidences / accidentals


def car_optimal_rate(chain: DetectionChain) -> float:
    """Pair rate maximizing car_model: sqrt(dark_s*dark_i/(eta_s*eta_i))."""
    if chain.dark_s_per_s <= 0.0 or chain.dark_i_per_s <= 0.0:
        raise ValueError("CAR has no interior maximum without dark counts")
    if chain.eta_s <= 0.0 or chain.eta_i <= 0.0:
        raise ValueError("CAR has no interior maximum with zero efficiency")
    return math.sqrt(
        chain.dark_s_per_s * chain.dark_i_per_s / (chain.eta_s * chain.eta_i)
    )


def simulate_timetags(
    src: SourceRate,
    bp: BiphotonParams,
    chain: DetectionChain,
    duration_s: float,
    seed,
) -> TimeTagStream:
    """Monte Carlo detector record of a CW pair source.

    Pairs arrive as a Poisson process at pair_rate(src); the signal-idler
    delay is drawn from the two-sided exponential matching the pair
    correlation function; each photon independently survives with its arm
    efficiency; surviving timestamps get Gaussian jitter; independent dark
    counts are added per channel.  Fixed seed gives a bit-reproducible
    stream.  If jitter pushes the earliest event below zero the whole
    record is translated so timestamps stay non-negative.
    """
    if duration_s <= 0.0:
        raise ValueError("duration_s must be > 0")
    rng = np.random.default_rng(seed)
    duration_ps = duration_s * 1e12

    n_pairs = rng.poisson(pair_rate(src) * duration_s)
    t_pair = rng.uniform(0.0, duration_ps, n_pairs)
    delay = rng.laplace(0.0, coherence_scale_ps(bp), n_pairs)
    keep_s = rng.random(n_pairs) < chain.eta_s
    keep_i = rng.random(n_pairs) < chain.eta_i

    t_signal = t_pair[keep_s]
    t_idler = (t_pair + delay)[keep_i]
    if chain.jitter_sigma_ps > 0.0:
        t_signal = t_signal + rng.normal(0.0, chain.jitter_sigma_ps, t_signal.size)
        t_idler = t_idler + rng.normal(0.0, chain.jitter_sigma_ps, t_idler.size)

    n_dark_s = rng.poisson(chain.dark_s_per_s * duration_s)
    n_dark_i = rng.poisson(chain.dark_i_per_s * duration_s)
    dark_s = rng.uniform(0.0, duration_ps, n_dark_s)
    dark_i = rng.uniform(0.0, duration_ps, n_dark_i)

    t_all = np.concatenate([t_signal, dark_s, t_idler, dark_i])
    ch_all = np.concatenate(
        [
            np.zeros(t_signal.size + n_dark_s, dtype=np.uint8),
            np.ones(t_idler.size + n_dark_i, dtype=np.uint8),
        ]
    )
    t_int = np.rint(t_all).astype(np.int64)
    order = np.argsort(t_int, kind="stable")
    t_int = t_int[order]
    ch_all = ch_all[order]
    if t_int.size and t_int[0] < 0:
        t_int = t_int - t_int[0]
    return TimeTagStream(t_int, ch_all)


@dataclass(frozen=True)
class Histogram:
    """Cross-correlation histogram with bin centers in ps."""

    bin_centers_ps: np.ndarray
    counts: np.ndarray

    def total(self) -> int:
        return int(self.counts.sum())

    def csv_rows(self):
        return list(zip(self.bin_centers_ps.tolist(), self.counts.tolist()))


HISTOGRAM_CSV_HEADER = ("bin_center_ps", "counts")


def _cross_deltas(t0: np.ndarray, t1: np.ndarray, limit_ps: float) -> np.ndarray:
    """All (t1 - t0) differences with |delta| <= limit, via a sliding window."""
    lo = np.searchsorted(t1, t0 - limit_ps, side="left")
    hi = np.searchsorted(t1, t0 + limit_ps, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = np.cumsum(counts) - counts
    idx = np.arange(total, dtype=np.int64) - np.repeat(starts, counts) + np.repeat(lo, counts)
    return t1[idx] - np.repeat(t0, counts)


def coincidence_histogram(stream: TimeTagStream, range_ns: float, bin_ps: float) -> Histogram:
    """Histogram of cross-channel delays (t_ch1 - t_ch0) over +-range/2.

    Bin centers sit at integer multiples of bin_ps so a zero-delay pair
    lands in the central bin; bin_ps must divide the range evenly.
    """
    if range_ns <= 0.0 or bin_ps <= 0.0:
        raise ValueError("range and bin must be > 0")
    if abs(bin_ps - round(bin_ps)) > 1e-9:
        # timestamps are integer picoseconds; fractional bins would alias
        raise ValueError("bin_ps must be a whole number of picoseconds")
    range_ps = range_ns * 1e3
    n_bins_f = range_ps / bin_ps
    if abs(n_bins_f - round(n_bins_f)) > 1e-9:
        raise ValueError("bin_ps must divide range_ns evenly")
    k_max = int(round(range_ps / (2.0 * bin_ps)))

    t0 = stream.channel_times(0)
    t1 = stream.channel_times(1)
    deltas = _cross_deltas(t0, t1, limit_ps=(k_max + 0.5) * bin_ps)
    # half-open bins [k*bin - bin/2, k*bin + bin/2); plain rounding would
    # break ties to even and alias the integer-ps delay lattice
    k = np.floor(deltas / bin_ps + 0.5).astype(np.int64)
    k = k[np.abs(k) <= k_max]
    counts = np.bincount(k + k_max, minlength=2 * k_max + 1)
    centers = np.arange(-k_max, k_max + 1, dtype=np.int64) * int(round(bin_ps))
    return Histogram(bin_centers_ps=centers, counts=counts.astype(np.int64))


def count_coincidences(stream: TimeTagStream, center_ns: float, window_ns: float) -> int:
    """Cross-channel pairs with (t_ch1 - t_ch0) within +-window/2 of center."""
    t0 = stream.channel_times(0)
    t1 = stream.channel_times(1)
    center_ps = center_ns * 1e3
    half_ps = window_ns * 1e3 / 2.0
    lo = np.searchsorted(t1, t0 + center_ps - half_ps, side="left")
    hi = np.searchsorted(t1, t0 + center_ps + half_ps, side="right")
    return int((hi - lo).sum())


def car_from_stream(
    stream: TimeTagStream,
    chain: DetectionChain,
    accidental_offset_ns: float = 50.0,
) -> float:
    """CAR estimated with a delayed accidental window.

    Ratio of coincidences in the zero-delay window to coincidences in an
    equal window displaced by accidental_offset_ns.  Returns +inf when the
    accidental window is empty.
    """
    if len(stream) == 0:
        raise ValueError("empty stream")
    if accidental_offset_ns <= 2.0 * chain.window_ns:
        raise ValueError("accidental offset must far exceed the window")
    peak = count_coincidences(stream, 0.0, chain.window_ns)
    accidental = count_coincidences(stream, accidental_offset_ns, chain.window_ns)
    if accidental == 0:
        return math.inf
    return peak / accidental
