"""Probabilistic kNN over feature vectors.

Votes among the k nearest training instances give the class-membership
probabilities. A sub-1/k additive bias, graded by which class holds
the closest instance, totally orders the ranked list without ever
inverting a vote-count difference. The entropy of the (pre-bias) vote
fractions, normalised by ln(C), acts as a certainty score for the
rejection option. Candidate-class filtering restricts the search to a
query-time subset of species.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import EmptyCandidates, KTooLarge, SpecMismatch
from .features import FeatureVector, SummarySpec
from .store import TrainingStore

KL_EPSILON = 1e-9


class Metric(enum.Enum):
    L1 = "l1"
    KL = "kl"
    HELLINGER = "hellinger"


class Decision(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class ClassifierConfig:
    k: int = 5
    metric: Metric = Metric.L1
    tie_bias_m: float = 2.0
    candidate_classes: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.tie_bias_m <= 1.0:
            raise ValueError("tie_bias_m must be > 1")
        if self.candidate_classes is not None and len(self.candidate_classes) == 0:
            raise ValueError("candidate_classes must be nonempty when given")


@dataclass(frozen=True)
class Posterior:
    """Vote fractions, bias-adjusted ranking and entropy certainty.

    ``probs`` aligns with ``candidate_ids`` (ascending class ids) and
    sums to one; ``biased_scores`` are used only for ranking and sum to
    more than one. ``ranking`` lists candidate class ids best-first.
    """

    candidate_ids: np.ndarray
    probs: np.ndarray
    biased_scores: np.ndarray
    ranking: np.ndarray
    entropy: float
    normalized_entropy: float

    def prob_of(self, class_id: int) -> float:
        pos = np.searchsorted(self.candidate_ids, class_id)
        if pos < len(self.candidate_ids) and self.candidate_ids[pos] == class_id:
            return float(self.probs[pos])
        return 0.0

    def rank_of(self, class_id: int) -> int | None:
        """1-based position in the ranking, None if not a candidate."""
        hits = np.nonzero(self.ranking == class_id)[0]
        return int(hits[0]) + 1 if len(hits) else None


def entropy_nats(probs: np.ndarray) -> float:
    """Shannon entropy of a probability vector with 0 ln 0 = 0."""
    p = np.asarray(probs, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def distance(a: FeatureVector, b: FeatureVector, metric: Metric) -> float:
    """Pairwise distance; the reference for the bank kernels.

    L1 is the Manhattan distance. KL is the divergence of eps-smoothed,
    renormalised inputs, taken as KL(a || b) with a the query.
    HELLINGER is one minus the Bhattacharyya coefficient. KL and
    HELLINGER require histogram (probability) vectors.
    """
    if a.spec != b.spec:
        raise SpecMismatch(f"{a.spec} vs {b.spec}")
    da, db = a.dense(), b.dense()
    if metric is Metric.L1:
        return float(np.abs(da - db).sum())
    if isinstance(a.spec, SummarySpec):
        raise SpecMismatch(f"{metric.value} requires histogram features")
    if metric is Metric.HELLINGER:
        return float(1.0 - np.sqrt(da * db).sum())
    a_t = (da + KL_EPSILON) / (da.sum() + da.size * KL_EPSILON)
    b_t = (db + KL_EPSILON) / (db.sum() + db.size * KL_EPSILON)
    return float((a_t * np.log(a_t / b_t)).sum())


def add_tie_bias(
    probs: np.ndarray,
    nearest_order: Sequence[int],
    k: int,
    m: float,
) -> np.ndarray:
    """Add the tie-breaking grid to vote fractions.

    ``nearest_order`` holds positions into ``probs``, nearest class
    first. That class receives the largest bias, 1/(k*m), the grid
    descending uniformly to zero; with m > 1 the spread stays below
    1/k, so ties break toward the closest training instance while
    strict vote orderings survive.
    """
    if m <= 1.0:
        raise ValueError("tie-bias m must be > 1")
    probs = np.asarray(probs, dtype=np.float64)
    c = len(probs)
    bias = np.zeros(c)
    if c > 1:
        grid = np.arange(c - 1, -1, -1, dtype=np.float64) / (c - 1) / (k * m)
        bias[np.asarray(nearest_order)] = grid
    return probs + bias


def _bank_distances(query: FeatureVector, store: TrainingStore, metric: Metric) -> np.ndarray:
    if isinstance(store.feature_spec, SummarySpec):
        if metric is not Metric.L1:
            raise SpecMismatch(f"{metric.value} requires histogram features")
        mat, _ = store.dense_bank
        return np.abs(mat - query.dense()).sum(axis=1)

    bank = store.csr_bank
    q = query.dense()
    if metric is Metric.L1:
        return kernels.l1_csr(q, bank.indices, bank.masses, bank.offsets)
    if metric is Metric.HELLINGER:
        return kernels.hellinger_csr(q, bank.indices, bank.masses, bank.offsets)
    a_t = (q + KL_EPSILON) / (q.sum() + q.size * KL_EPSILON)
    h_a = float((a_t * np.log(a_t)).sum())
    return kernels.kl_csr(
        a_t, h_a, KL_EPSILON, bank.n_bins,
        bank.indices, bank.masses, bank.offsets, bank.inst_sums,
    )


def classify(query: FeatureVector, store: TrainingStore, cfg: ClassifierConfig) -> Posterior:
    """Vote among the k nearest candidate-class instances.

    Distance ties between instances break by (class id, instance
    index). The entropy certainty is computed on the pre-bias vote
    fractions; biased scores exist only to order the returned list.
    """
    if query.spec != store.feature_spec:
        raise SpecMismatch(f"query {query.spec} vs store {store.feature_spec}")

    if cfg.candidate_classes is None:
        cand_ids = np.arange(store.n_classes)
    else:
        cand_ids = np.unique(np.asarray(cfg.candidate_classes, dtype=np.int64))
        cand_ids = cand_ids[(cand_ids >= 0) & (cand_ids < store.n_classes)]
    if len(cand_ids) == 0:
        raise EmptyCandidates("no candidate classes present in the store")

    class_ids = (
        store.dense_bank[1]
        if isinstance(store.feature_spec, SummarySpec)
        else store.csr_bank.class_ids
    )
    cand_mask = np.isin(class_ids, cand_ids)
    n_cand_instances = int(cand_mask.sum())
    if cfg.k > n_cand_instances:
        raise KTooLarge(f"k={cfg.k} > {n_cand_instances} candidate instances")

    dists = _bank_distances(query, store, cfg.metric)
    dists = np.where(cand_mask, dists, np.inf)

    # bank rows are ordered by (class id, instance index); a stable sort
    # therefore breaks distance ties exactly that way
    order = np.argsort(dists, kind="stable")
    top = order[:cfg.k]
    c = len(cand_ids)
    pos_of = np.full(store.n_classes, -1, dtype=np.int64)
    pos_of[cand_ids] = np.arange(c)
    votes = np.bincount(pos_of[class_ids[top]], minlength=c)
    probs = votes / cfg.k

    # order candidate classes by their single closest instance
    min_dist = np.full(c, np.inf)
    np.minimum.at(min_dist, pos_of[class_ids[cand_mask]], dists[cand_mask])
    nearest_order = np.lexsort((np.arange(c), min_dist))

    biased = add_tie_bias(probs, nearest_order, cfg.k, cfg.tie_bias_m)
    ranking = cand_ids[np.argsort(-biased, kind="stable")]

    h = entropy_nats(probs)
    norm = h / np.log(c) if c > 1 else 0.0
    return Posterior(
        candidate_ids=cand_ids,
        probs=probs,
        biased_scores=biased,
        ranking=ranking,
        entropy=h,
        normalized_entropy=float(norm),
    )


def rejection_decision(post: Posterior, max_normalized_entropy: float) -> Decision:
    """Reject exactly when normalised entropy exceeds the threshold."""
    if post.normalized_entropy > max_normalized_entropy:
        return Decision.REJECT
    return Decision.ACCEPT
