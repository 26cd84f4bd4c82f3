"""Bird sound identification from crowd-sourced recordings.

Pipeline: WAV decoding -> band-limited spectrograms -> power-threshold
frame selection (training only) -> histogram / summary feature vectors
-> balanced instance store -> probabilistic kNN with tie-breaking bias
and an entropy rejection option -> retrieval metrics.
"""

from .audio import AudioClip, Spectrogram, compute_spectrogram, decode_wav, fft_size_for
from .classifier import (
    ClassifierConfig,
    Decision,
    Metric,
    Posterior,
    add_tie_bias,
    classify,
    distance,
    entropy_nats,
    rejection_decision,
)
from .features import (
    FEATURE_SPECS,
    MEAN_STD_2D,
    MODE_1D,
    MODE_DELTA_2D,
    SUMMARY6,
    FeatureVector,
    FrameFeatures,
    HistogramKind,
    HistogramSpec,
    aggregate,
    aggregate_histogram,
    aggregate_summary,
    frame_features,
)
from .ingest import ArchiveClient, ArchiveConfig, Manifest, RecordingMeta, min_frames_filter
from .kernels import backend as kernel_backend
from .metrics import (
    EvalReport,
    LabeledResult,
    accuracy_at_n,
    auc_pr_one_vs_all,
    auc_roc_one_vs_all,
    evaluate,
    mrr_at_n,
    rejection_sweep,
    summarize,
)
from .selection import SelectionMask, select_frames
from .store import (
    ClassTable,
    TrainingStore,
    assemble_instances,
    balance_subsample,
    load_store,
    save_store,
)

__version__ = "0.1.0"
