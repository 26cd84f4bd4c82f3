"""Retrieval-style evaluation: one-vs-all AUCs, accuracy@N, MRR@N and
entropy-rejection sweeps, plus CSV/JSON report serialisation.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .classifier import Posterior
from .errors import DegenerateClass

log = logging.getLogger(__name__)

SWEEP_STEP = 0.1
MRR_CUTOFF = 10


@dataclass(frozen=True)
class LabeledResult:
    """A classified test instance with its ground-truth class id.

    The true class need not be in the candidate set; such results count
    as never retrieved.
    """

    true_class: int
    posterior: Posterior


@dataclass(frozen=True)
class AucSummary:
    min: float
    max: float
    median: float
    iqr: float
    weighted_mean: float


@dataclass(frozen=True)
class RejectionPoint:
    raw_threshold: float
    normalized_threshold: float
    accepted_fraction: float
    mrr_at_10: float | None
    accuracy_at_1: float | None


@dataclass
class EvalReport:
    labels: list[str]
    n_test: list[int]
    per_class_auc_roc: list[float]  # NaN for degenerate classes
    per_class_auc_pr: list[float]
    roc_summary: AucSummary
    pr_summary: AucSummary
    accuracy: float
    accuracy_at: dict[int, float] = field(default_factory=dict)
    mrr_at: dict[int, float] = field(default_factory=dict)
    rejection_curve: list[RejectionPoint] = field(default_factory=list)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean rank of their group."""
    order = np.argsort(x, kind="stable")
    sx = x[order]
    n = len(x)
    starts = np.concatenate(([True], sx[1:] != sx[:-1]))
    group = np.cumsum(starts) - 1
    counts = np.bincount(group)
    firsts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    avg = firsts + (counts - 1) / 2.0 + 1.0
    ranks = np.empty(n)
    ranks[order] = avg[group]
    return ranks


def auc_roc_one_vs_all(results: Sequence[LabeledResult], positive_class: int) -> float:
    """Mann-Whitney rank statistic over posterior scores of one class.

    Equals (concordant pairs + half the tied pairs) / (P * N); scores
    are the pre-bias vote fractions of ``positive_class``.
    """
    scores = np.array([r.posterior.prob_of(positive_class) for r in results])
    positive = np.array([r.true_class == positive_class for r in results])
    p = int(positive.sum())
    n = len(results) - p
    if p == 0 or n == 0:
        raise DegenerateClass(f"class {positive_class}: {p} positives, {n} negatives")
    ranks = _average_ranks(scores)
    return float((ranks[positive].sum() - p * (p + 1) / 2.0) / (p * n))


def auc_pr_one_vs_all(results: Sequence[LabeledResult], positive_class: int) -> float:
    """Average precision with pessimistic tie ordering.

    Equal-score ties place negatives first, so the value is a lower
    bound and deterministic.
    """
    scores = np.array([r.posterior.prob_of(positive_class) for r in results])
    positive = np.array([r.true_class == positive_class for r in results])
    p = int(positive.sum())
    if p == 0:
        raise DegenerateClass(f"class {positive_class}: no positive instances")
    order = np.lexsort((positive, -scores))
    hits = positive[order]
    ranks = np.nonzero(hits)[0] + 1
    cum_pos = np.arange(1, p + 1)
    return float((cum_pos / ranks).sum() / p)


def _true_rank(result: LabeledResult) -> int | None:
    return result.posterior.rank_of(result.true_class)


def accuracy_at_n(results: Sequence[LabeledResult], n: int) -> float:
    """Fraction of results whose true class is within the top n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    hits = sum(1 for r in results if (rank := _true_rank(r)) is not None and rank <= n)
    return hits / len(results)


def mrr_at_n(results: Sequence[LabeledResult], n: int) -> float:
    """Mean reciprocal rank, zero when the true class is below rank n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    total = sum(
        1.0 / rank
        for r in results
        if (rank := _true_rank(r)) is not None and rank <= n
    )
    return total / len(results)


def rejection_sweep(
    results: Sequence[LabeledResult], candidate_count: int
) -> list[RejectionPoint]:
    """MRR@10 and acceptance as the entropy threshold sweeps 0..ln(C).

    Thresholds step by 0.1 in raw entropy; the final grid point is the
    first at or above ln(C), so the curve always ends at full
    acceptance. Points where nothing is accepted carry None metrics.
    """
    if not results:
        raise ValueError("no results to sweep")
    max_entropy = math.log(candidate_count) if candidate_count > 1 else 0.0
    n_points = math.floor(max_entropy / SWEEP_STEP) + 2
    entropies = np.array([r.posterior.entropy for r in results])

    curve = []
    for i in range(n_points):
        t = SWEEP_STEP * i
        accepted = [r for r, h in zip(results, entropies) if h <= t]
        frac = len(accepted) / len(results)
        mrr = mrr_at_n(accepted, MRR_CUTOFF) if accepted else None
        acc1 = accuracy_at_n(accepted, 1) if accepted else None
        curve.append(
            RejectionPoint(
                raw_threshold=t,
                normalized_threshold=t / max_entropy if max_entropy > 0 else 0.0,
                accepted_fraction=frac,
                mrr_at_10=mrr,
                accuracy_at_1=acc1,
            )
        )
    return curve


def summarize(per_class_auc: Sequence[float], weights: Sequence[int]) -> AucSummary:
    """Range, median, IQR and test-count-weighted mean of an AUC vector."""
    values = np.asarray(per_class_auc, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    keep = ~np.isnan(values)
    values, w = values[keep], w[keep]
    if values.size == 0:
        raise ValueError("no defined per-class AUC values to summarise")
    q25, q75 = np.percentile(values, [25.0, 75.0])
    return AucSummary(
        min=float(values.min()),
        max=float(values.max()),
        median=float(np.median(values)),
        iqr=float(q75 - q25),
        weighted_mean=float((values * w).sum() / w.sum()),
    )


def evaluate(
    results: Sequence[LabeledResult],
    labels: Sequence[str],
    n_list: Sequence[int] = (1, 5, 10),
    candidate_count: int | None = None,
) -> EvalReport:
    """Full report over labelled results; degenerate classes are logged
    and carry NaN AUCs, excluded from the summaries."""
    if not results:
        raise ValueError("no results to evaluate")
    n_classes = len(labels)
    n_test = [sum(1 for r in results if r.true_class == c) for c in range(n_classes)]

    auc_roc, auc_pr = [], []
    for c in range(n_classes):
        try:
            auc_roc.append(auc_roc_one_vs_all(results, c))
            auc_pr.append(auc_pr_one_vs_all(results, c))
        except DegenerateClass as exc:
            log.warning("skipping AUC for %s: %s", labels[c], exc)
            auc_roc.append(float("nan"))
            auc_pr.append(float("nan"))

    if candidate_count is None:
        candidate_count = len(results[0].posterior.candidate_ids)

    return EvalReport(
        labels=list(labels),
        n_test=n_test,
        per_class_auc_roc=auc_roc,
        per_class_auc_pr=auc_pr,
        roc_summary=summarize(auc_roc, n_test),
        pr_summary=summarize(auc_pr, n_test),
        accuracy=accuracy_at_n(results, 1),
        accuracy_at={n: accuracy_at_n(results, n) for n in n_list},
        mrr_at={n: mrr_at_n(results, n) for n in n_list},
        rejection_curve=rejection_sweep(results, candidate_count),
    )


# --- report serialisation ---

def write_per_class_csv(report: EvalReport, sink: IO[str]) -> None:
    writer = csv.writer(sink)
    writer.writerow(["species", "n_test", "auc_roc", "auc_pr"])
    for label, n, roc, pr in zip(
        report.labels, report.n_test, report.per_class_auc_roc, report.per_class_auc_pr
    ):
        writer.writerow([
            label,
            n,
            "" if math.isnan(roc) else f"{roc:.6f}",
            "" if math.isnan(pr) else f"{pr:.6f}",
        ])


def write_sweep_csv(curve: Sequence[RejectionPoint], sink: IO[str]) -> None:
    writer = csv.writer(sink)
    writer.writerow([
        "raw_threshold", "normalized_threshold", "accepted_fraction",
        "mrr_at_10", "accuracy_at_1",
    ])
    for pt in curve:
        writer.writerow([
            f"{pt.raw_threshold:.1f}",
            f"{pt.normalized_threshold:.6f}",
            f"{pt.accepted_fraction:.6f}",
            "" if pt.mrr_at_10 is None else f"{pt.mrr_at_10:.6f}",
            "" if pt.accuracy_at_1 is None else f"{pt.accuracy_at_1:.6f}",
        ])


def report_to_json(report: EvalReport) -> str:
    def _clean(x):
        if isinstance(x, float) and math.isnan(x):
            return None
        return x

    doc = {
        "per_class": [
            {
                "species": label,
                "n_test": n,
                "auc_roc": _clean(roc),
                "auc_pr": _clean(pr),
            }
            for label, n, roc, pr in zip(
                report.labels, report.n_test,
                report.per_class_auc_roc, report.per_class_auc_pr,
            )
        ],
        "auc_roc_summary": vars(report.roc_summary),
        "auc_pr_summary": vars(report.pr_summary),
        "accuracy": report.accuracy,
        "accuracy_at": {str(k): v for k, v in report.accuracy_at.items()},
        "mrr_at": {str(k): v for k, v in report.mrr_at.items()},
        "rejection_curve": [
            {
                "raw_threshold": pt.raw_threshold,
                "normalized_threshold": pt.normalized_threshold,
                "accepted_fraction": pt.accepted_fraction,
                "mrr_at_10": pt.mrr_at_10,
                "accuracy_at_1": pt.accuracy_at_1,
            }
            for pt in report.rejection_curve
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
