import math

import numpy as np
import pytest
from scipy import stats

from phonon_sensor.constants import DEFAULT_AXIAL_FREQUENCY, TWO_PI
from phonon_sensor.photons import (
    DetectionConfig,
    PhotonStream,
    PipelineConfig,
    TacHistogram,
    apply_time_jitter,
    detect,
    load_histogram,
    merge,
    sample_arrivals,
    save_histogram,
    synthesize_histogram,
    tac_fold,
)
from phonon_sensor.physics import default_beams, total_scattering_rate

BEAMS = default_beams()
OMEGA = DEFAULT_AXIAL_FREQUENCY
PERIOD = TWO_PI / OMEGA

# Frozen quadrature oracle: mean emitted photons over a 10 s gate at
# A = 22 um equals the period-average of the two-beam rate times the gate.
EXPECTED_EMITTED_22UM_10S = 12464153.58171404


def uniform_stream(n, gate, seed=0):
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(0, gate, n))
    return PhotonStream(times, np.ones(n, dtype=bool), gate)


class TestSampleArrivals:
    def test_constant_rate_is_poisson(self):
        rate = 1000.0
        counts = [
            len(sample_arrivals(lambda t: np.full_like(t, rate), 1.0, seed=s))
            for s in range(100)
        ]
        mean = np.mean(counts)
        assert abs(mean - rate) < 3 * math.sqrt(rate / 100)
        # Poisson: variance comparable to the mean.
        assert np.var(counts) == pytest.approx(rate, rel=0.5)

    def test_zero_rate_empty(self):
        stream = sample_arrivals(lambda t: np.zeros_like(t), 1.0, seed=1)
        assert len(stream) == 0

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            sample_arrivals(lambda t: -np.ones_like(t), 1.0, seed=1)

    def test_rate_exceeding_bound_rejected(self):
        with pytest.raises(ValueError, match="bound"):
            sample_arrivals(lambda t: np.full_like(t, 10.0), 1.0, seed=1, rate_max=1.0)

    def test_emitted_budget_matches_integral_oracle(self):
        stream = sample_arrivals(
            lambda t: total_scattering_rate(BEAMS, 22e-6, 0.0, OMEGA, t), 10.0, seed=7
        )
        assert abs(len(stream) - EXPECTED_EMITTED_22UM_10S) < 3 * math.sqrt(
            EXPECTED_EMITTED_22UM_10S
        )

    def test_deterministic(self):
        fn = lambda t: total_scattering_rate(BEAMS, 20e-6, 0.1, OMEGA, t)
        a = sample_arrivals(fn, 0.1, seed=3)
        b = sample_arrivals(fn, 0.1, seed=3)
        np.testing.assert_array_equal(a.arrival_times, b.arrival_times)


class TestDetect:
    def test_identity_when_perfect(self):
        stream = uniform_stream(500, 1.0)
        out = detect(stream, DetectionConfig(efficiency=1.0, snr=math.inf))
        np.testing.assert_array_equal(out.arrival_times, stream.arrival_times)
        assert out.n_background == 0

    def test_half_efficiency_binomial(self):
        ratios = []
        for seed in range(100):
            stream = uniform_stream(1000, 1.0, seed=seed)
            out = detect(stream, DetectionConfig(efficiency=0.5, rng_seed=seed))
            ratios.append(out.n_signal / 1000)
        # Binomial thinning: mean 0.5, sd of the mean ratio over 100 seeds.
        sd = math.sqrt(0.25 / 1000 / 100)
        assert abs(np.mean(ratios) - 0.5) < 3 * sd

    def test_reference_chain_counts(self):
        # 0.28% efficiency on the reference emission budget gives about
        # 3.56e4 signal detections and 5.35e4 total at SNR 2.
        n_emitted = 12710000
        stream = uniform_stream(n_emitted, 10.0, seed=5)
        out = detect(stream, DetectionConfig(efficiency=0.0028, snr=2.0, rng_seed=5))
        expected_signal = n_emitted * 0.0028
        assert abs(out.n_signal - expected_signal) < 3 * math.sqrt(expected_signal)
        expected_total = expected_signal * 1.5
        assert abs(len(out) - 5.353e4) < 3 * math.sqrt(expected_total) + abs(
            expected_total - 5.353e4
        )
        assert len(out) == pytest.approx(5.353e4, rel=0.02)

    def test_background_rate_fixes_snr(self):
        stream = uniform_stream(200000, 10.0, seed=9)
        out = detect(stream, DetectionConfig(efficiency=0.5, snr=2.0, rng_seed=9))
        assert out.n_signal / out.n_background == pytest.approx(2.0, rel=0.05)


class TestTacFold:
    def test_exact_folding(self):
        t = PERIOD * np.array([0.25, 1.25, 2.25])
        stream = PhotonStream(t, np.ones(3, dtype=bool), 10 * PERIOD)
        # Bin width T/10 keeps the fold target strictly inside bin 2.
        hist = tac_fold(stream, PERIOD, PERIOD / 10)
        assert hist.total_counts == 3
        assert np.count_nonzero(hist.counts) == 1
        assert hist.counts[2] == 3

    def test_uniform_arrivals_flat(self):
        stream = uniform_stream(200000, 1000 * PERIOD, seed=11)
        hist = tac_fold(stream, PERIOD, PERIOD / 50)  # integer bin count
        _, p_value = stats.chisquare(hist.counts)
        assert p_value > 0.01

    def test_counts_conserved(self):
        rng = np.random.default_rng(13)
        times = np.sort(rng.uniform(0, 5.0, 12345))
        stream = PhotonStream(times, np.ones(12345, dtype=bool), 5.0)
        hist = tac_fold(stream, PERIOD, 10e-9)
        assert hist.total_counts == 12345

    def test_partial_last_bin_geometry(self):
        hist = tac_fold(uniform_stream(10, 1.0, seed=1), PERIOD, 10e-9)
        assert hist.n_bins == 538
        assert hist.n_bins * hist.bin_width >= hist.period
        widths = np.diff(hist.bin_edges)
        assert widths[-1] == pytest.approx(hist.period - 537 * 10e-9)

    def test_bad_bin_width_rejected(self):
        stream = uniform_stream(10, 1.0)
        with pytest.raises(ValueError):
            tac_fold(stream, PERIOD, 2 * PERIOD)
        with pytest.raises(ValueError):
            tac_fold(stream, 0.0, 10e-9)


def two_sample_chi2(a, b):
    """Pearson two-sample homogeneity statistic and p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    ka = math.sqrt(b.sum() / a.sum())
    kb = 1 / ka
    chi2 = float(np.sum((ka * a - kb * b) ** 2 / (a + b)))
    dof = len(a) - 1
    return chi2, stats.chi2.sf(chi2, dof)


class TestPhaseRotation:
    def test_phase_shift_rotates_histogram(self):
        # Generating with a phase advanced by an integer number of bins is
        # statistically identical to rotating the folded histogram.
        pipe = PipelineConfig(gate_time=10.0)
        n_shift = 60
        # Use an exact integer-bin period so rotation is exact.
        omega = TWO_PI / (538 * pipe.bin_width)
        delta = n_shift * pipe.bin_width * omega
        h_base = synthesize_histogram(BEAMS, 22e-6, 0.0, omega, pipe, seed=17)
        h_shift = synthesize_histogram(BEAMS, 22e-6, delta, omega, pipe, seed=18)
        # Advancing the phase moves the pattern to earlier folded times.
        rotated = np.roll(h_base.counts, -n_shift)
        _, p_value = two_sample_chi2(rotated, h_shift.counts)
        assert p_value > 0.001


class TestMerge:
    def test_identity_and_commutativity(self):
        pipe = PipelineConfig(gate_time=1.0)
        h = synthesize_histogram(BEAMS, 20e-6, 0.0, OMEGA, pipe, seed=1)
        empty = TacHistogram(
            bin_width=h.bin_width,
            period=h.period,
            counts=np.zeros_like(h.counts),
            gate_time=1.0,
        )
        merged = merge(h, empty)
        np.testing.assert_array_equal(merged.counts, h.counts)
        ab = merge(h, merge(h, empty))
        ba = merge(merge(h, empty), h)
        np.testing.assert_array_equal(ab.counts, ba.counts)
        assert ab.gate_time == ba.gate_time

    def test_mismatched_binning_rejected(self):
        a = tac_fold(uniform_stream(10, 1.0), PERIOD, 10e-9)
        b = tac_fold(uniform_stream(10, 1.0), PERIOD, 20e-9)
        with pytest.raises(ValueError):
            merge(a, b)
        c = tac_fold(uniform_stream(10, 1.0), 2 * PERIOD, 10e-9)
        with pytest.raises(ValueError):
            merge(a, c)

    def test_ten_short_runs_match_one_long_run(self):
        pipe_short = PipelineConfig(gate_time=1.0)
        pipe_long = PipelineConfig(gate_time=10.0)
        parts = [
            synthesize_histogram(BEAMS, 22e-6, 0.1, OMEGA, pipe_short, seed=100 + i)
            for i in range(10)
        ]
        combined = parts[0]
        for part in parts[1:]:
            combined = merge(combined, part)
        assert combined.gate_time == pytest.approx(10.0)
        single = synthesize_histogram(BEAMS, 22e-6, 0.1, OMEGA, pipe_long, seed=200)
        assert combined.total_counts == pytest.approx(
            single.total_counts, abs=6 * math.sqrt(single.total_counts)
        )
        _, p_value = two_sample_chi2(combined.counts, single.counts)
        assert p_value > 0.001


class TestJitter:
    def test_zero_sigma_identity(self):
        stream = uniform_stream(100, 1.0)
        assert apply_time_jitter(stream, 0.0, seed=1) is stream

    def test_jitter_smears_folded_structure(self):
        pipe_sharp = PipelineConfig(gate_time=5.0, timing_jitter=0.0)
        pipe_smeared = PipelineConfig(gate_time=5.0, timing_jitter=0.8e-6)
        sharp = synthesize_histogram(BEAMS, 22e-6, 0.0, OMEGA, pipe_sharp, seed=3)
        smeared = synthesize_histogram(BEAMS, 22e-6, 0.0, OMEGA, pipe_smeared, seed=3)
        assert smeared.total_counts == sharp.total_counts  # jitter moves, never drops
        assert np.ptp(smeared.counts) < 0.7 * np.ptp(sharp.counts)


class TestHistogramFile:
    def test_round_trip_bit_exact(self, tmp_path):
        pipe = PipelineConfig(gate_time=2.0)
        hist = synthesize_histogram(BEAMS, 21.677e-6, 0.028, OMEGA, pipe, seed=5)
        hist.config_hash = "abc123"
        path = tmp_path / "hist.txt"
        save_histogram(hist, path)
        first = path.read_bytes()
        loaded = load_histogram(path)
        save_histogram(loaded, path)
        assert path.read_bytes() == first
        np.testing.assert_array_equal(loaded.counts, hist.counts)
        assert loaded.period == hist.period
        assert loaded.bin_width == hist.bin_width
        assert loaded.gate_time == hist.gate_time
        assert loaded.config_hash == "abc123"

    def test_corrupt_file_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not a histogram\n")
        with pytest.raises(ValueError):
            load_histogram(path)

    def test_tampered_counts_rejected(self, tmp_path):
        pipe = PipelineConfig(gate_time=1.0)
        hist = synthesize_histogram(BEAMS, 21.677e-6, 0.028, OMEGA, pipe, seed=5)
        path = tmp_path / "hist.txt"
        save_histogram(hist, path)
        lines = path.read_text().splitlines()
        lines[-1] = str(int(lines[-1]) + 1)  # bump one count
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match="total_counts"):
            load_histogram(path)


class TestValidation:
    def test_stream_ordering_enforced(self):
        with pytest.raises(ValueError):
            PhotonStream(np.array([2.0, 1.0]), np.array([True, True]), 10.0)
        with pytest.raises(ValueError):
            PhotonStream(np.array([1.0, 11.0]), np.array([True, True]), 10.0)

    def test_detection_config_validation(self):
        with pytest.raises(ValueError):
            DetectionConfig(efficiency=0.0)
        with pytest.raises(ValueError):
            DetectionConfig(efficiency=0.5, snr=0.0)

    def test_histogram_validation(self):
        with pytest.raises(ValueError):
            TacHistogram(
                bin_width=10e-9,
                period=PERIOD,
                counts=np.zeros(10, dtype=int),
                gate_time=1.0,
            )
        with pytest.raises(ValueError):
            TacHistogram(
                bin_width=10e-9,
                period=PERIOD,
                counts=-np.ones(538, dtype=int),
                gate_time=1.0,
            )
