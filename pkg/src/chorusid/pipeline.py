"""End-to-end glue: audio in, feature vectors and stores out.

Training recordings pass through power-threshold frame selection;
query/test recordings are featurised over their whole length with no
selection.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Mapping, Sequence

from .audio import AudioClip, compute_spectrogram, decode_wav
from .errors import InsufficientFrames
from .features import (
    FeatureSpec,
    FeatureVector,
    FrameFeatures,
    aggregate,
    frame_features,
)
from .selection import select_frames
from .store import TrainingStore, assemble_instances, balance_subsample

log = logging.getLogger(__name__)


def selected_features(clip: AudioClip) -> FrameFeatures:
    """Frame features of the power-selected frames of one training clip.

    Successor-mode differences are computed over the full recording
    before the selection mask is applied, so a selected frame keeps its
    delta even when the successor frame was discarded.
    """
    spec = compute_spectrogram(clip)
    feats = frame_features(spec)
    mask = select_frames(spec)
    return feats.take(mask.selected)


def query_vector(clip: AudioClip, spec: FeatureSpec) -> FeatureVector:
    """Whole-recording feature vector; no frame selection on queries."""
    return aggregate(frame_features(compute_spectrogram(clip)), spec)


def query_vector_from_wav(path: str | Path, spec: FeatureSpec) -> FeatureVector:
    clip = decode_wav(Path(path).read_bytes(), source_id=str(path))
    return query_vector(clip, spec)


def build_store(
    clips_by_species: Mapping[str, Sequence[AudioClip]],
    feature_spec: FeatureSpec,
    instance_frames: int = 100,
    balance_target: int | None = None,
    seed: int = 0,
) -> tuple[TrainingStore, dict[str, int]]:
    """Training store from per-species clips, plus selected-frame counts.

    Species that cannot fill a single instance are excluded with a
    warning rather than failing the build.
    """
    per_class: dict[str, list[FeatureVector]] = {}
    frame_counts: dict[str, int] = {}
    for species, clips in clips_by_species.items():
        per_recording = [
            (clip.source_id or str(i), selected_features(clip))
            for i, clip in enumerate(clips)
        ]
        frame_counts[species] = sum(len(f) for _, f in per_recording)
        try:
            blocks = assemble_instances(per_recording, instance_frames)
        except InsufficientFrames as exc:
            log.warning("excluding %s: %s", species, exc)
            continue
        per_class[species] = [aggregate(block, feature_spec) for block in blocks]

    if not per_class:
        raise InsufficientFrames("no species yielded a full training instance")
    store = balance_subsample(
        per_class, target=balance_target, seed=seed, instance_frames=instance_frames
    )
    return store, frame_counts
