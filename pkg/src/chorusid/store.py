"""Balanced per-class training instances and their on-disk format.

Selected frame features are lined up per class in recording order
(with cuts), chunked into fixed-length blocks, aggregated to feature
vectors, and balanced by seeded subsampling. The store serialises to a
little-endian binary format with a trailing CRC32; masses are
quantised to float32 at build time so save/load round-trips are
bit-exact.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from functools import cached_property
from typing import BinaryIO, Mapping, Sequence

import numpy as np

from .errors import (
    BadMagic,
    ChecksumMismatch,
    InsufficientFrames,
    TargetTooLarge,
    VersionMismatch,
)
from .features import (
    FEATURE_SPECS,
    SUMMARY6,
    FeatureSpec,
    FeatureVector,
    FrameFeatures,
    HistogramKind,
    HistogramSpec,
    SummarySpec,
)

MAGIC = b"CHOR"
FORMAT_VERSION = 1
DEFAULT_INSTANCE_FRAMES = 100

_KIND_CODES = {
    HistogramKind.MEAN_STD_2D: 0,
    HistogramKind.MODE_1D: 1,
    HistogramKind.MODE_DELTA_2D: 2,
}
_SUMMARY_CODE = 3
_SPARSE_DTYPE = np.dtype([("idx", "<u4"), ("mass", "<f4")])


@dataclass(frozen=True)
class ClassTable:
    """Dense class ids 0..C-1 mapped to unique species labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("class labels must be unique")

    def __len__(self) -> int:
        return len(self.labels)

    def id_of(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class CsrBank:
    """Flattened sparse view of a histogram store for the distance kernels."""

    indices: np.ndarray  # int32, concatenated per-instance bin indices
    masses: np.ndarray  # float64
    offsets: np.ndarray  # int64, len n_instances + 1
    class_ids: np.ndarray  # int32 per instance
    inst_sums: np.ndarray  # float64 per-instance mass totals
    n_bins: int

    @property
    def n_instances(self) -> int:
        return len(self.class_ids)


@dataclass(frozen=True)
class TrainingStore:
    """Immutable balanced bank of per-class feature vectors."""

    classes: ClassTable
    instances: tuple[tuple[FeatureVector, ...], ...]
    feature_spec: FeatureSpec
    instance_frames: int = DEFAULT_INSTANCE_FRAMES
    build_seed: int = 0

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_instances_per_class(self) -> int:
        return len(self.instances[0]) if self.instances else 0

    @property
    def total_instances(self) -> int:
        return sum(len(block) for block in self.instances)

    @cached_property
    def csr_bank(self) -> CsrBank:
        """Sparse bank over all instances, ordered by (class_id, index)."""
        if isinstance(self.feature_spec, SummarySpec):
            raise ValueError("summary stores have no sparse bank; use dense_bank")
        idx_parts, mass_parts, lengths, cids = [], [], [], []
        for cid, block in enumerate(self.instances):
            for fv in block:
                if len(fv.indices) == 0:
                    raise ValueError("histogram instance with empty support")
                idx_parts.append(fv.indices.astype(np.int32))
                mass_parts.append(fv.masses.astype(np.float64))
                lengths.append(len(fv.indices))
                cids.append(cid)
        offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        masses = np.concatenate(mass_parts) if mass_parts else np.empty(0)
        return CsrBank(
            indices=np.concatenate(idx_parts) if idx_parts else np.empty(0, np.int32),
            masses=masses,
            offsets=offsets,
            class_ids=np.asarray(cids, dtype=np.int32),
            inst_sums=np.add.reduceat(masses, offsets[:-1]) if lengths else np.empty(0),
            n_bins=self.feature_spec.dim,
        )

    @cached_property
    def dense_bank(self) -> tuple[np.ndarray, np.ndarray]:
        """(n_instances, dim) float64 matrix plus per-row class ids."""
        rows, cids = [], []
        for cid, block in enumerate(self.instances):
            for fv in block:
                rows.append(fv.dense())
                cids.append(cid)
        mat = np.vstack(rows) if rows else np.empty((0, self.feature_spec.dim))
        return mat, np.asarray(cids, dtype=np.int32)


def assemble_instances(
    per_recording: Sequence[tuple[str, FrameFeatures]],
    instance_frames: int = DEFAULT_INSTANCE_FRAMES,
) -> list[FrameFeatures]:
    """Chunk one class's selected frames into fixed-length blocks.

    Recordings are ordered lexicographically by identifier, their
    selected frame features concatenated into one sequence (preserving
    each recording's internal order, with cuts), and split into
    consecutive non-overlapping blocks. The trailing remainder is
    dropped; blocks may span recording boundaries.
    """
    if instance_frames < 1:
        raise ValueError("instance_frames must be >= 1")
    ordered = sorted(per_recording, key=lambda pair: pair[0])
    parts = [feats for _, feats in ordered if len(feats) > 0]
    total = sum(len(p) for p in parts)
    if total < instance_frames:
        raise InsufficientFrames(
            f"{total} selected frames < one {instance_frames}-frame instance"
        )
    lined_up = FrameFeatures.concatenate(parts)
    n_blocks = total // instance_frames
    return [
        lined_up.take(slice(i * instance_frames, (i + 1) * instance_frames))
        for i in range(n_blocks)
    ]


def _quantize(fv: FeatureVector) -> FeatureVector:
    # float32 masses make save -> load -> save byte-stable
    return FeatureVector(fv.spec, fv.indices, fv.masses.astype(np.float32))


def balance_subsample(
    per_class: Mapping[str, Sequence[FeatureVector]],
    target: int | None = None,
    seed: int = 0,
    instance_frames: int = DEFAULT_INSTANCE_FRAMES,
) -> TrainingStore:
    """Sample the same number of instances from every class, without
    replacement, deterministically for a given seed.

    ``target`` defaults to the smallest class's instance count. Sampled
    indices are re-sorted so target == class size reproduces the input
    order.
    """
    if not per_class:
        raise ValueError("no classes to balance")
    labels = tuple(sorted(per_class))
    counts = {lab: len(per_class[lab]) for lab in labels}
    if target is None:
        target = min(counts.values())
    if target < 1:
        raise ValueError("target must be >= 1")
    short = [lab for lab in labels if counts[lab] < target]
    if short:
        raise TargetTooLarge(f"target {target} exceeds instance counts for {short}")

    spec_set = {fv.spec for vecs in per_class.values() for fv in vecs}
    if len(spec_set) != 1:
        raise ValueError(f"mixed feature specs across classes: {spec_set}")
    feature_spec = next(iter(spec_set))

    rng = np.random.default_rng(seed)
    chosen: list[tuple[FeatureVector, ...]] = []
    for lab in labels:
        vecs = per_class[lab]
        picks = rng.choice(len(vecs), size=target, replace=False)
        picks.sort()
        chosen.append(tuple(_quantize(vecs[i]) for i in picks))

    return TrainingStore(
        classes=ClassTable(labels),
        instances=tuple(chosen),
        feature_spec=feature_spec,
        instance_frames=instance_frames,
        build_seed=seed,
    )


def _spec_code(spec: FeatureSpec) -> int:
    if isinstance(spec, SummarySpec):
        return _SUMMARY_CODE
    return _KIND_CODES[spec.kind]


def _spec_from_code(code: int) -> FeatureSpec:
    for name, spec in FEATURE_SPECS.items():
        if _spec_code(spec) == code:
            return spec
    raise ChecksumMismatch(f"unknown feature-spec code {code}")


def save_store(store: TrainingStore, sink: BinaryIO) -> None:
    """Serialise ``store``; see the module docstring for the layout."""
    parts = [
        MAGIC,
        struct.pack(
            "<HBBIQ",
            FORMAT_VERSION,
            _spec_code(store.feature_spec),
            0,
            store.instance_frames,
            store.build_seed,
        ),
        struct.pack("<I", store.n_classes),
    ]
    for label, block in zip(store.classes.labels, store.instances):
        encoded = label.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", len(block)))
    for block in store.instances:
        for fv in block:
            if fv.is_sparse:
                rec = np.empty(len(fv.indices), dtype=_SPARSE_DTYPE)
                rec["idx"] = fv.indices
                rec["mass"] = fv.masses
                parts.append(struct.pack("<I", len(rec)))
                parts.append(rec.tobytes())
            else:
                values = np.asarray(fv.masses, dtype="<f4")
                parts.append(struct.pack("<I", len(values)))
                parts.append(values.tobytes())
    body = b"".join(parts)
    sink.write(body)
    sink.write(struct.pack("<I", zlib.crc32(body)))


def load_store(source: BinaryIO) -> TrainingStore:
    """Parse a store file; validates magic, version and CRC32 first."""
    data = source.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic("not a training-store file")
    if len(data) < 10:
        raise ChecksumMismatch("file truncated")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"format version {version}, expected {FORMAT_VERSION}")
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != stored_crc:
        raise ChecksumMismatch("CRC32 check failed")

    kind_code, _reserved, instance_frames, seed = struct.unpack_from("<BBIQ", data, 6)
    spec = _spec_from_code(kind_code)
    pos = 20
    (n_classes,) = struct.unpack_from("<I", data, pos)
    pos += 4
    labels: list[str] = []
    counts: list[int] = []
    for _ in range(n_classes):
        (label_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        labels.append(data[pos:pos + label_len].decode("utf-8"))
        pos += label_len
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        counts.append(count)

    sparse = not isinstance(spec, SummarySpec)
    instances: list[tuple[FeatureVector, ...]] = []
    for count in counts:
        block = []
        for _ in range(count):
            (n_items,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if sparse:
                rec = np.frombuffer(data, dtype=_SPARSE_DTYPE, count=n_items, offset=pos)
                pos += n_items * _SPARSE_DTYPE.itemsize
                block.append(FeatureVector(spec, rec["idx"].copy(), rec["mass"].copy()))
            else:
                values = np.frombuffer(data, dtype="<f4", count=n_items, offset=pos)
                pos += n_items * 4
                block.append(FeatureVector(spec, None, values.copy()))
        instances.append(tuple(block))

    return TrainingStore(
        classes=ClassTable(tuple(labels)),
        instances=tuple(instances),
        feature_spec=spec,
        instance_frames=instance_frames,
        build_seed=seed,
    )
