"""Relative power-threshold selection of bird-sound frames.

Applied to training recordings only: the 1% most energetic frames of a
recording estimate its peak level, and every frame with at least a
quarter of that power is kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio import Spectrogram

THRESHOLD_RATIO = 0.25
TOP_FRACTION = 0.01


@dataclass(frozen=True)
class SelectionMask:
    selected: np.ndarray  # bool per frame, original order
    threshold: float
    peak_estimate: float

    def __len__(self) -> int:
        return len(self.selected)

    @property
    def n_selected(self) -> int:
        return int(np.count_nonzero(self.selected))


def select_frames(spec: Spectrogram) -> SelectionMask:
    """Mark frames whose power reaches 0.25x the estimated peak level.

    The peak estimate is the mean power of the top ceil(0.01 * n)
    frames (at least one). Ties at the top-1% boundary go to the
    earlier frame. A single-frame or all-zero recording selects
    everything (threshold collapses to <= every power).
    """
    power = np.asarray(spec.frame_power, dtype=np.float64)
    n = len(power)
    if n < 1:
        raise ValueError("spectrogram has no frames")

    top_count = max(1, math.ceil(TOP_FRACTION * n))
    # stable sort on (-power) ranks equal powers by earlier index
    order = np.argsort(-power, kind="stable")
    peak_estimate = float(power[order[:top_count]].mean())
    threshold = THRESHOLD_RATIO * peak_estimate
    return SelectionMask(
        selected=power >= threshold,
        threshold=threshold,
        peak_estimate=peak_estimate,
    )
