"""Frame-level features and histogram/summary aggregation."""

import numpy as np
import pytest

from chorusid import (
    MEAN_STD_2D,
    MODE_1D,
    MODE_DELTA_2D,
    AudioClip,
    FrameFeatures,
    aggregate_histogram,
    aggregate_summary,
    compute_spectrogram,
    frame_features,
)
from chorusid.errors import EmptyInput, NoDeltas

from conftest import tone


def make_feats(f_mode, delta=None, f_mean=None, f_std=None) -> FrameFeatures:
    f_mode = np.asarray(f_mode, dtype=np.float64)
    n = len(f_mode)
    if delta is None:
        delta = np.full(n, np.nan)
        if n > 1:
            delta[:-1] = f_mode[1:] - f_mode[:-1]
    return FrameFeatures(
        f_mean=np.asarray(f_mean if f_mean is not None else f_mode, dtype=np.float64),
        f_std=np.asarray(f_std if f_std is not None else np.zeros(n), dtype=np.float64),
        f_mode=f_mode,
        delta_f_mode=np.asarray(delta, dtype=np.float64),
    )


class TestFrameFeatures:
    def test_pure_tone_mode_and_std(self):
        spec = compute_spectrogram(AudioClip(tone(6000, 0.5, 48000), 48000))
        feats = frame_features(spec)
        bin_width = 48000 / 1024
        assert np.all(np.abs(feats.f_mode - 6000) <= bin_width)
        # independent recomputation of the spread from the magnitudes
        p = spec.frames[0] / spec.frames[0].sum()
        mu = float((p * spec.freqs).sum())
        sigma = float(np.sqrt((p * (spec.freqs - mu) ** 2).sum()))
        assert feats.f_mean[0] == pytest.approx(mu, abs=1e-9)
        assert feats.f_std[0] == pytest.approx(sigma, abs=1e-6)

    def test_delta_sign_convention(self):
        # successor mode minus current mode: 2000 then 2500 -> +500
        feats = make_feats([2000.0, 2500.0])
        assert feats.delta_f_mode[0] == 500.0
        assert np.isnan(feats.delta_f_mode[1])

    def test_flat_spectrum_frame(self):
        spec = compute_spectrogram(AudioClip(np.zeros(960), 48000))
        flat = spec.frames.copy()
        flat[:] = 1.0
        object.__setattr__(spec, "frames", flat)
        feats = frame_features(spec)
        assert feats.f_mean[0] == pytest.approx(spec.freqs.mean())
        assert feats.f_mean[0] == pytest.approx(5500.0, abs=50.0)
        assert feats.f_mode[0] == spec.freqs[0]  # first-maximum tie break

    def test_zero_frames_use_uniform_spectrum(self):
        spec = compute_spectrogram(AudioClip(np.zeros(48000), 48000))
        feats = frame_features(spec)
        assert np.all(feats.f_mean == pytest.approx(spec.freqs.mean()))
        assert np.all(feats.f_mode == spec.freqs[0])
        assert np.all(feats.f_std > 0)

    def test_range_invariants_on_noise(self, rng):
        clip = AudioClip(rng.normal(size=24000), 48000)
        feats = frame_features(compute_spectrogram(clip))
        assert np.all((feats.f_mean >= 1000) & (feats.f_mean <= 10000))
        assert np.all((feats.f_mode >= 1000) & (feats.f_mode <= 10000))
        assert np.all(feats.f_std >= 0)
        deltas = feats.delta_f_mode[:-1]
        assert np.all(np.abs(deltas) <= 9000)

    def test_last_frame_delta_absent(self):
        clip = AudioClip(tone(4000, 0.1, 48000), 48000)
        feats = frame_features(compute_spectrogram(clip))
        assert np.isnan(feats.delta_f_mode[-1])
        assert not np.isnan(feats.delta_f_mode[:-1]).any()


class TestAggregateHistogram:
    def test_point_mass_in_bin_37(self):
        # bin 37 covers [1000 + 37*90, 1000 + 38*90) = [4330, 4420)
        feats = make_feats(np.full(100, 4375.0))
        fv = aggregate_histogram(feats, MODE_1D)
        assert fv.indices.tolist() == [37]
        assert fv.masses.tolist() == [1.0]

    def test_two_bins_half_half(self):
        values = np.array([1000 + 10 * 90 + 45.0] * 50 + [1000 + 20 * 90 + 45.0] * 50)
        fv = aggregate_histogram(make_feats(values), MODE_1D)
        assert fv.indices.tolist() == [10, 20]
        assert fv.masses.tolist() == [0.5, 0.5]

    def test_out_of_range_delta_clamps_to_top_bin(self):
        feats = make_feats([5000.0, 5000.0], delta=[3000.0, np.nan])
        fv = aggregate_histogram(feats, MODE_DELTA_2D)
        axis1 = (5000 - 1000) // 90
        assert fv.indices.tolist() == [axis1 * 50 + 49]
        assert fv.masses.tolist() == [1.0]

    def test_out_of_range_negative_delta_clamps_to_bottom_bin(self):
        feats = make_feats([5000.0, 5000.0], delta=[-2500.0, np.nan])
        fv = aggregate_histogram(feats, MODE_DELTA_2D)
        axis1 = (5000 - 1000) // 90
        assert fv.indices.tolist() == [axis1 * 50 + 0]

    def test_mode_delta_excludes_nan_frames(self):
        feats = make_feats([2000.0, 2000.0, 2000.0], delta=[0.0, np.nan, np.nan])
        fv = aggregate_histogram(feats, MODE_DELTA_2D)
        assert fv.masses.sum() == pytest.approx(1.0)
        assert len(fv.indices) == 1

    def test_empty_input_raises(self):
        with pytest.raises(EmptyInput):
            aggregate_histogram(make_feats([]), MODE_1D)
        with pytest.raises(EmptyInput):
            # frames exist but none carries a delta
            aggregate_histogram(make_feats([5000.0], delta=[np.nan]), MODE_DELTA_2D)

    def test_mass_conservation_random(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 400))
            feats = FrameFeatures(
                f_mean=rng.uniform(1000, 10000, n),
                f_std=rng.uniform(0, 4500, n),
                f_mode=rng.uniform(1000, 10000, n),
                delta_f_mode=np.where(
                    rng.random(n) < 0.9, rng.uniform(-3000, 3000, n), np.nan
                ),
            )
            for spec in (MODE_1D, MEAN_STD_2D, MODE_DELTA_2D):
                fv = aggregate_histogram(feats, spec)
                assert abs(fv.masses.sum() - 1.0) <= 1e-9
                assert np.all(fv.masses > 0)
                assert np.all(np.diff(fv.indices.astype(np.int64)) > 0)

    def test_permutation_invariance(self, rng):
        n = 200
        feats = FrameFeatures(
            f_mean=rng.uniform(1000, 10000, n),
            f_std=rng.uniform(0, 4500, n),
            f_mode=rng.uniform(1000, 10000, n),
            delta_f_mode=rng.uniform(-2500, 2500, n),
        )
        perm = rng.permutation(n)
        for spec in (MODE_1D, MEAN_STD_2D, MODE_DELTA_2D):
            assert aggregate_histogram(feats, spec) == aggregate_histogram(
                feats.take(perm), spec
            )

    def test_matches_bruteforce_dense_binning(self, rng):
        """Sparse aggregation equals per-frame dense binning with edges."""
        edges1 = np.linspace(1000, 10000, 101)
        for spec, axis2_edges, column in (
            (MODE_1D, None, "f_mode"),
            (MEAN_STD_2D, np.linspace(1000, 10000, 51), "f_std"),
            (MODE_DELTA_2D, np.linspace(-2000, 2000, 51), "delta_f_mode"),
        ):
            n = 500
            feats = FrameFeatures(
                f_mean=rng.uniform(1000, 10000, n),
                f_std=rng.uniform(0, 5000, n),
                f_mode=rng.uniform(1000, 10000, n),
                delta_f_mode=rng.uniform(-3000, 3000, n),
            )
            dense = np.zeros(spec.dim)
            axis1_src = feats.f_mean if spec is MEAN_STD_2D else feats.f_mode
            for i in range(n):
                b1 = min(np.searchsorted(edges1, axis1_src[i], side="right") - 1, 99)
                if axis2_edges is None:
                    dense[b1] += 1
                else:
                    v = getattr(feats, column)[i]
                    b2 = np.searchsorted(axis2_edges, v, side="right") - 1
                    b2 = min(max(b2, 0), 49)
                    dense[b1 * 50 + b2] += 1
            dense /= dense.sum()
            fv = aggregate_histogram(feats, spec)
            np.testing.assert_allclose(fv.dense(), dense, atol=1e-12)

    def test_f_std_structural_zero_bins(self, rng):
        """f_std <= 4.5 kHz analytically, so axis-2 bins 20+ stay empty."""
        clip = AudioClip(rng.normal(size=48000), 48000)
        feats = frame_features(compute_spectrogram(clip))
        fv = aggregate_histogram(feats, MEAN_STD_2D)
        axis2 = fv.indices.astype(np.int64) % 50
        assert np.all(axis2 < 20)


class TestAggregateSummary:
    def test_constant_sequence(self):
        feats = make_feats(np.full(10, 4000.0), delta=[0.0] * 9 + [np.nan])
        fv = aggregate_summary(feats)
        np.testing.assert_allclose(fv.masses, [4000, 4000, 4000, 0, 0, 0])

    def test_linear_interpolation_percentiles(self):
        feats = make_feats(
            np.arange(1, 101, dtype=np.float64),
            delta=np.concatenate([np.arange(1, 100, dtype=np.float64), [np.nan]]),
        )
        fv = aggregate_summary(feats)
        assert fv.masses[0] == pytest.approx(5.95)
        assert fv.masses[1] == pytest.approx(50.5)
        assert fv.masses[2] == pytest.approx(95.05)

    def test_single_frame_pair(self):
        # one delta value -> all delta percentiles collapse onto it
        feats = make_feats([3000.0, 3000.0])
        fv = aggregate_summary(feats)
        np.testing.assert_allclose(fv.masses, [3000, 3000, 3000, 0, 0, 0])
        feats = make_feats([3000.0, 3200.0])
        fv = aggregate_summary(feats)
        np.testing.assert_allclose(fv.masses[3:], [200, 200, 200])
        np.testing.assert_allclose(fv.masses[:3], [3010, 3100, 3190])

    def test_percentile_components_non_decreasing(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 300))
            feats = make_feats(rng.uniform(1000, 10000, n))
            fv = aggregate_summary(feats)
            assert fv.masses[0] <= fv.masses[1] <= fv.masses[2]
            assert fv.masses[3] <= fv.masses[4] <= fv.masses[5]

    def test_errors(self):
        with pytest.raises(EmptyInput):
            aggregate_summary(make_feats([]))
        with pytest.raises(NoDeltas):
            aggregate_summary(make_feats([5000.0], delta=[np.nan]))
