import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from cavityspdc import (
    DetectionChain,
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
from cavityspdc.photostats import TTAG_MAGIC


def quiet_chain(**overrides):
    base = dict(eta_s=1.0, eta_i=1.0, dark_s_per_s=0.0, dark_i_per_s=0.0,
                window_ns=3.2, jitter_sigma_ps=0.0, bin_ps=25.0)
    base.update(overrides)
    return DetectionChain(**base)


class TestPairRate:
    def test_product_form(self):
        assert pair_rate(SourceRate(0.7, 150.0, 458.0)) == pytest.approx(48_090.0)

    def test_zero_power(self):
        assert pair_rate(SourceRate(0.7, 0.0, 458.0)) == 0.0

    def test_unit_definition(self):
        assert pair_rate(SourceRate(0.7, 1.0, 1.0)) == pytest.approx(0.7)


class TestCarModel:
    def test_matches_quoted_regime(self, chain):
        car = car_model(48_090.0, chain)
        assert car == pytest.approx(6.3e3, rel=0.01)
        assert car > 6e3

    def test_multiphoton_rolloff(self, chain):
        rate = 1e12
        assert car_model(rate, chain) == pytest.approx(
            1.0 / (rate * chain.window_ns * 1e-9), rel=1e-3
        )

    def test_no_darks_reduces_to_inverse_rate_window(self):
        chain = quiet_chain(eta_s=0.125, eta_i=0.125)
        for rate in (1e3, 1e5, 1e7):
            assert car_model(rate, chain) == pytest.approx(
                1.0 / (rate * 3.2e-9), rel=1e-12
            )

    def test_zero_rate_zero_darks_undefined(self):
        with pytest.raises(ValueError, match="no accidentals"):
            car_model(0.0, quiet_chain())

    def test_unimodal_with_interior_peak(self, chain):
        rates = np.logspace(0.0, 7.0, 10_000)
        cars = np.array([car_model(r, chain) for r in rates])
        diffs = np.diff(cars)
        sign_changes = np.sum(np.diff(np.sign(diffs)) != 0)
        assert sign_changes == 1
        assert rates[np.argmax(cars)] == pytest.approx(
            car_optimal_rate(chain), rel=5e-3
        )


class TestCarOptimalRate:
    def test_closed_form(self, chain):
        assert car_optimal_rate(chain) == pytest.approx(800.0)

    def test_sqrt_scaling_in_darks(self, chain):
        # quadrupling the dark-rate product doubles the optimum
        scaled = DetectionChain(
            eta_s=chain.eta_s, eta_i=chain.eta_i,
            dark_s_per_s=2.0 * chain.dark_s_per_s,
            dark_i_per_s=2.0 * chain.dark_i_per_s,
            window_ns=chain.window_ns, jitter_sigma_ps=chain.jitter_sigma_ps,
            bin_ps=chain.bin_ps,
        )
        assert car_optimal_rate(scaled) == pytest.approx(2.0 * car_optimal_rate(chain))

    def test_grid_scan_agrees(self, chain):
        rates = np.logspace(0.0, 7.0, 10_000)
        cars = [car_model(r, chain) for r in rates]
        assert rates[int(np.argmax(cars))] == pytest.approx(
            car_optimal_rate(chain), rel=5e-3
        )

    def test_zero_darks_rejected(self):
        with pytest.raises(ValueError, match="no interior maximum"):
            car_optimal_rate(quiet_chain())


class TestTimeTagStream:
    def test_requires_sorted_timestamps(self):
        with pytest.raises(ValueError, match="non-decreasing"):
            TimeTagStream([10, 5], [0, 1])

    def test_requires_binary_channels(self):
        with pytest.raises(ValueError, match="channel"):
            TimeTagStream([1, 2], [0, 3])

    def test_binary_roundtrip(self, tmp_path):
        stream = TimeTagStream([0, 17, 17, 4200], [1, 0, 1, 0])
        path = tmp_path / "tags.ttag"
        write_ttag(stream, path)
        raw = path.read_bytes()
        assert raw.startswith(TTAG_MAGIC)
        assert len(raw) == len(TTAG_MAGIC) + 4 * 9  # u64 + u8 records
        assert read_ttag(path) == stream

    def test_negative_timestamps_rejected_on_write(self, tmp_path):
        stream = TimeTagStream([-5, 3], [0, 1])
        with pytest.raises(ValueError, match="translate"):
            write_ttag(stream, tmp_path / "bad.ttag")

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ttag"
        path.write_bytes(b"NOTTAG" + b"\x00" * 18)
        with pytest.raises(ValueError, match="not a TTAG1"):
            read_ttag(path)


class TestSimulateTimetags:
    def test_empty_without_efficiency_or_darks(self, source_150mw, bp0):
        chain = quiet_chain(eta_s=0.0, eta_i=0.0)
        stream = simulate_timetags(source_150mw, bp0, chain, 0.5, seed=0)
        assert len(stream) == 0

    def test_fixed_seed_bit_reproducible(self, source_150mw, bp0, chain):
        a = simulate_timetags(source_150mw, bp0, chain, 0.5, seed=42)
        b = simulate_timetags(source_150mw, bp0, chain, 0.5, seed=42)
        assert a == b
        c = simulate_timetags(source_150mw, bp0, chain, 0.5, seed=43)
        assert a != c

    def test_singles_rates_within_3_sigma(self, bp0, chain):
        src = SourceRate(0.7, 75.0, 458.0)
        duration = 10.0
        stream = simulate_timetags(src, bp0, chain, duration, seed=2)
        expected = (0.125 * pair_rate(src) + 100.0) * duration
        for ch in (0, 1):
            n = stream.channel_times(ch).size
            assert abs(n - expected) < 3.0 * math.sqrt(expected)

    def test_delay_distribution_matches_g2(self, bp0):
        # low rate keeps accidentals negligible; chi^2 against the exact
        # bin masses of the two-sided exponential across one million pairs
        from cavityspdc.biphoton import coherence_scale_ps

        chain = quiet_chain(bin_ps=50.0)
        src = SourceRate(0.7, 1.0, 14_285.714285714286)  # 1e4 pairs/s
        duration = 100.0
        stream = simulate_timetags(src, bp0, chain, duration, seed=3)
        hist = coincidence_histogram(stream, 10.0, 50.0)
        scale_ps = coherence_scale_ps(bp0)
        # timestamps live on the integer-ps lattice, so bin k holds the
        # continuous mass of [k*bin - bin/2 - 0.5, k*bin + bin/2 - 0.5)
        edges = np.concatenate(
            [hist.bin_centers_ps - 25.5, [hist.bin_centers_ps[-1] + 24.5]]
        )
        cdf = stats.laplace.cdf(edges, scale=scale_ps)
        probs = np.diff(cdf)
        probs = probs / probs.sum()
        expected = hist.total() * probs
        mask = expected >= 10.0
        chi2 = float(np.sum((hist.counts[mask] - expected[mask]) ** 2 / expected[mask]))
        dof = int(mask.sum()) - 1
        assert chi2 / dof < 2.0

    def test_timestamps_non_negative(self, source_150mw, bp0, chain):
        stream = simulate_timetags(source_150mw, bp0, chain, 0.2, seed=11)
        assert stream.t_ps.min() >= 0

    def test_rejects_nonpositive_duration(self, source_150mw, bp0, chain):
        with pytest.raises(ValueError):
            simulate_timetags(source_150mw, bp0, chain, 0.0, seed=0)


class TestCoincidenceHistogram:
    def test_single_pair_lands_in_central_bin(self):
        stream = TimeTagStream([1_000_000, 1_000_000], [0, 1])
        hist = coincidence_histogram(stream, 20.0, 25.0)
        center = hist.bin_centers_ps.size // 2
        assert hist.bin_centers_ps[center] == 0
        assert hist.counts[center] == 1
        assert hist.total() == 1

    def test_known_delay_bin(self):
        stream = TimeTagStream([1_000_000, 1_000_500], [0, 1])  # +500 ps
        hist = coincidence_histogram(stream, 20.0, 25.0)
        assert hist.counts[hist.bin_centers_ps.tolist().index(500)] == 1

    def test_bin_must_divide_range(self):
        stream = TimeTagStream([0, 10], [0, 1])
        with pytest.raises(ValueError, match="divide"):
            coincidence_histogram(stream, 10.0, 33.0)

    def test_dark_only_channels_are_flat(self, bp0):
        chain = quiet_chain(eta_s=0.0, eta_i=0.0, dark_s_per_s=5000.0,
                            dark_i_per_s=5000.0, bin_ps=100.0)
        src = SourceRate(0.7, 0.0, 458.0)
        stream = simulate_timetags(src, bp0, chain, 20.0, seed=4)
        hist = coincidence_histogram(stream, 20.0, 100.0)
        result = stats.chisquare(hist.counts)
        assert result.pvalue > 0.01

    def test_translation_invariance(self, source_150mw, bp0, chain):
        stream = simulate_timetags(source_150mw, bp0, chain, 0.5, seed=5)
        shifted = stream.translated(123_456_789)
        a = coincidence_histogram(stream, 20.0, 25.0)
        b = coincidence_histogram(shifted, 20.0, 25.0)
        assert a.total() == b.total()
        np.testing.assert_array_equal(a.counts, b.counts)

    def test_fitted_width_tracks_jitter_broadened_peak(self, bp0, chain):
        from cavityspdc import fit_exp_g2, t_fwhm_ns

        src = SourceRate(0.7, 75.0, 458.0)
        stream = simulate_timetags(src, bp0, chain, 10.0, seed=6)
        hist = coincidence_histogram(stream, 10.0, 25.0)
        fit = fit_exp_g2(hist)
        assert fit.converged
        assert fit.derived["t_fwhm_ns"] == pytest.approx(t_fwhm_ns(bp0), rel=0.10)


class TestCarFromStream:
    def test_agrees_with_model_near_optimal_rate(self, bp0):
        # pick a chain whose optimal rate gives plenty of accidentals
        chain = quiet_chain(eta_s=0.5, eta_i=0.5, dark_s_per_s=2e4,
                            dark_i_per_s=2e4)
        rate = car_optimal_rate(chain)  # 4e4 pairs/s
        src = SourceRate(1.0, 1.0, rate)
        duration = 30.0
        stream = simulate_timetags(src, bp0, chain, duration, seed=7)
        car_mc = car_from_stream(stream, chain)
        model = car_model(rate, chain)
        coincidences = count_coincidences(stream, 0.0, chain.window_ns)
        sigma = model * math.sqrt(1.0 / coincidences + 1.0 /
                                  max(count_coincidences(stream, 50.0, chain.window_ns), 1))
        assert abs(car_mc - model) < 3.0 * sigma

    def test_uncorrelated_channels_car_near_unity(self, bp0):
        chain = quiet_chain(eta_s=0.0, eta_i=0.0, dark_s_per_s=3e4,
                            dark_i_per_s=3e4)
        src = SourceRate(0.7, 0.0, 458.0)
        stream = simulate_timetags(src, bp0, chain, 20.0, seed=8)
        assert car_from_stream(stream, chain) == pytest.approx(1.0, abs=0.25)

    def test_quoted_power_range_bound(self, source_150mw, bp0, chain):
        stream = simulate_timetags(source_150mw, bp0, chain, 10.0, seed=5)
        assert car_from_stream(stream, chain) > 6e3

    def test_infinite_sentinel_when_no_accidentals(self, bp0):
        chain = quiet_chain()
        src = SourceRate(1.0, 1.0, 100.0)
        stream = simulate_timetags(src, bp0, chain, 1.0, seed=9)
        assert car_from_stream(stream, chain) == math.inf

    def test_empty_stream_rejected(self, chain):
        with pytest.raises(ValueError, match="empty"):
            car_from_stream(TimeTagStream([], []), chain)

    def test_offset_must_clear_window(self, source_150mw, bp0, chain):
        stream = simulate_timetags(source_150mw, bp0, chain, 0.1, seed=10)
        with pytest.raises(ValueError, match="offset"):
            car_from_stream(stream, chain, accidental_offset_ns=4.0)


class TestMonteCarloConvergence:
    def test_car_converges_to_model_at_1e6_coincidences(self, bp0):
        # 4.5e6 pairs at 50% arm efficiency leave over 1e6 coincidences in
        # the window and a few thousand accidentals, enough for 5%
        chain = quiet_chain(eta_s=0.5, eta_i=0.5)
        src = SourceRate(1.0, 1.0, 1e6)
        duration = 4.5
        stream = simulate_timetags(src, bp0, chain, duration, seed=21)
        assert count_coincidences(stream, 0.0, chain.window_ns) >= 1_000_000
        car_mc = car_from_stream(stream, chain)
        model = car_model(pair_rate(src), chain)
        assert car_mc == pytest.approx(model, rel=0.05)


@given(dt=st.integers(0, 10**9))
@settings(max_examples=25, deadline=None)
def test_count_coincidences_translation_invariant(dt):
    stream = TimeTagStream([100, 150, 90_000, 90_075], [0, 1, 0, 1])
    shifted = stream.translated(dt)
    assert count_coincidences(stream, 0.0, 3.2) == count_coincidences(
        shifted, 0.0, 3.2
    )
