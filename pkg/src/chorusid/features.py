"""Frame-level spectral features and their aggregation into feature vectors.

Per frame (after normalising the magnitude spectrum to unit sum):

* ``f_mean``  -- spectral centroid in Hz
* ``f_std``   -- spectral spread in Hz
* ``f_mode``  -- frequency of the maximum-magnitude bin
* ``delta_f_mode`` -- mode of the successor frame minus this frame's
  mode, taken in the original recording order (NaN for the last frame)

Aggregation produces either a unit-mass binned histogram (sparse) or a
6-dimensional percentile summary.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .audio import BAND_HIGH_HZ, BAND_LOW_HZ, Spectrogram
from .errors import EmptyInput, NoDeltas


class HistogramKind(enum.Enum):
    MEAN_STD_2D = "meanstd2d"
    MODE_1D = "mode1d"
    MODE_DELTA_2D = "modedelta2d"


AXIS1_BINS = 100
AXIS2_BINS = 50
DELTA_RANGE_HZ = (-2000.0, 2000.0)


@dataclass(frozen=True)
class HistogramSpec:
    """Fixed bin layout for one histogram kind.

    Axis 1 is always 100 uniform bins over [1, 10] kHz. Axis 2 (2D
    kinds only) is 50 uniform bins over [1, 10] kHz for MEAN_STD_2D or
    [-2, 2] kHz for MODE_DELTA_2D. 2D bins are flattened row-major:
    index = axis1_bin * 50 + axis2_bin.
    """

    kind: HistogramKind

    @property
    def dim(self) -> int:
        return AXIS1_BINS if self.kind is HistogramKind.MODE_1D else AXIS1_BINS * AXIS2_BINS

    @property
    def axis2_range(self):
        if self.kind is HistogramKind.MODE_1D:
            return None
        if self.kind is HistogramKind.MODE_DELTA_2D:
            return DELTA_RANGE_HZ
        return (BAND_LOW_HZ, BAND_HIGH_HZ)


@dataclass(frozen=True)
class SummarySpec:
    """Marker spec for the 6-dim percentile summary representation."""

    @property
    def dim(self) -> int:
        return 6


FeatureSpec = Union[HistogramSpec, SummarySpec]

MEAN_STD_2D = HistogramSpec(HistogramKind.MEAN_STD_2D)
MODE_1D = HistogramSpec(HistogramKind.MODE_1D)
MODE_DELTA_2D = HistogramSpec(HistogramKind.MODE_DELTA_2D)
SUMMARY6 = SummarySpec()

FEATURE_SPECS = {
    "meanstd2d": MEAN_STD_2D,
    "mode1d": MODE_1D,
    "modedelta2d": MODE_DELTA_2D,
    "summary6": SUMMARY6,
}


@dataclass(frozen=True)
class FrameFeatures:
    """Column-oriented per-frame features; delta_f_mode is NaN where absent."""

    f_mean: np.ndarray
    f_std: np.ndarray
    f_mode: np.ndarray
    delta_f_mode: np.ndarray

    def __len__(self) -> int:
        return len(self.f_mode)

    def take(self, mask_or_index) -> "FrameFeatures":
        """Row subset; deltas keep the values computed pre-selection."""
        return FrameFeatures(
            f_mean=self.f_mean[mask_or_index],
            f_std=self.f_std[mask_or_index],
            f_mode=self.f_mode[mask_or_index],
            delta_f_mode=self.delta_f_mode[mask_or_index],
        )

    @staticmethod
    def concatenate(parts: Sequence["FrameFeatures"]) -> "FrameFeatures":
        return FrameFeatures(
            f_mean=np.concatenate([p.f_mean for p in parts]),
            f_std=np.concatenate([p.f_std for p in parts]),
            f_mode=np.concatenate([p.f_mode for p in parts]),
            delta_f_mode=np.concatenate([p.delta_f_mode for p in parts]),
        )


class FeatureVector:
    """Instance representation: sparse unit-mass histogram or 6-dim summary.

    Sparse histograms store sorted unique bin ``indices`` (uint32) with
    their ``masses``; summaries store the six percentile values in
    ``masses`` with ``indices`` set to None.
    """

    __slots__ = ("spec", "indices", "masses")

    def __init__(self, spec: FeatureSpec, indices, masses):
        self.spec = spec
        self.indices = None if indices is None else np.asarray(indices, dtype=np.uint32)
        self.masses = np.asarray(masses)

    @property
    def is_sparse(self) -> bool:
        return self.indices is not None

    def dense(self) -> np.ndarray:
        if not self.is_sparse:
            return np.asarray(self.masses, dtype=np.float64)
        out = np.zeros(self.spec.dim, dtype=np.float64)
        out[self.indices] = self.masses
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        if self.spec != other.spec or self.is_sparse != other.is_sparse:
            return False
        if self.is_sparse and not np.array_equal(self.indices, other.indices):
            return False
        return np.array_equal(self.masses, other.masses)

    def __repr__(self) -> str:
        n = len(self.masses)
        return f"FeatureVector({self.spec}, nnz={n})"


def frame_features(spec: Spectrogram) -> FrameFeatures:
    """Compute the four per-frame statistics of a band-limited spectrogram.

    Zero-magnitude frames are assigned the uniform spectrum so silence
    maps to band-center statistics instead of NaN. Argmax ties resolve
    to the lowest-frequency bin.
    """
    mags = spec.frames
    freqs = spec.freqs
    n, b = mags.shape

    sums = mags.sum(axis=1)
    zero = sums <= 0.0
    p = np.empty_like(mags)
    np.divide(mags, np.where(zero, 1.0, sums)[:, None], out=p)
    if zero.any():
        p[zero] = 1.0 / b

    f_mean = p @ freqs
    second = p @ (freqs * freqs)
    var = np.maximum(second - f_mean * f_mean, 0.0)
    f_std = np.sqrt(var)

    mode_idx = np.argmax(mags, axis=1)
    if zero.any():
        mode_idx[zero] = 0
    f_mode = freqs[mode_idx]

    delta = np.full(n, np.nan)
    if n > 1:
        delta[:-1] = f_mode[1:] - f_mode[:-1]

    return FrameFeatures(f_mean=f_mean, f_std=f_std, f_mode=f_mode, delta_f_mode=delta)


def _bin_axis1(values: np.ndarray) -> np.ndarray:
    width = (BAND_HIGH_HZ - BAND_LOW_HZ) / AXIS1_BINS
    idx = np.floor((values - BAND_LOW_HZ) / width).astype(np.int64)
    return np.clip(idx, 0, AXIS1_BINS - 1)


def _bin_axis2(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    width = (hi - lo) / AXIS2_BINS
    idx = np.floor((values - lo) / width).astype(np.int64)
    # out-of-range values (e.g. delta beyond +-2 kHz) clamp to edge bins
    return np.clip(idx, 0, AXIS2_BINS - 1)


def aggregate_histogram(feats: FrameFeatures, spec: HistogramSpec) -> FeatureVector:
    """Bin frame features into ``spec``'s layout, normalised to unit mass.

    MODE_DELTA_2D excludes frames without a successor difference;
    out-of-range differences land in the nearest edge bin.
    """
    if len(feats) == 0:
        raise EmptyInput("no frame features to aggregate")

    if spec.kind is HistogramKind.MODE_1D:
        flat = _bin_axis1(feats.f_mode)
    elif spec.kind is HistogramKind.MEAN_STD_2D:
        lo, hi = spec.axis2_range
        flat = _bin_axis1(feats.f_mean) * AXIS2_BINS + _bin_axis2(feats.f_std, lo, hi)
    else:
        valid = ~np.isnan(feats.delta_f_mode)
        if not valid.any():
            raise EmptyInput("no frames carry a successor-mode difference")
        lo, hi = spec.axis2_range
        flat = (
            _bin_axis1(feats.f_mode[valid]) * AXIS2_BINS
            + _bin_axis2(feats.delta_f_mode[valid], lo, hi)
        )

    counts = np.bincount(flat, minlength=spec.dim).astype(np.float64)
    masses = counts / counts.sum()
    indices = np.nonzero(masses)[0]
    return FeatureVector(spec, indices.astype(np.uint32), masses[indices])


def aggregate_summary(feats: FrameFeatures) -> FeatureVector:
    """Six percentiles: 5/50/95 of f_mode and 50/75/95 of delta_f_mode.

    Linear interpolation between order statistics; frames lacking a
    delta are excluded from the delta percentiles.
    """
    if len(feats) == 0:
        raise EmptyInput("no frame features to summarise")
    deltas = feats.delta_f_mode[~np.isnan(feats.delta_f_mode)]
    if deltas.size == 0:
        raise NoDeltas("need at least one frame pair for delta percentiles")

    values = np.concatenate([
        np.percentile(feats.f_mode, [5.0, 50.0, 95.0]),
        np.percentile(deltas, [50.0, 75.0, 95.0]),
    ])
    return FeatureVector(SUMMARY6, None, values)


def aggregate(feats: FrameFeatures, spec: FeatureSpec) -> FeatureVector:
    if isinstance(spec, SummarySpec):
        return aggregate_summary(feats)
    return aggregate_histogram(feats, spec)
