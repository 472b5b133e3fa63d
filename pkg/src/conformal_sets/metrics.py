"""Coverage, set-size, stratified, naive top-k, and reliability metrics.

All functions are pure and permutation-invariant over items. Argmax ties
break to the lowest label index throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .conformal import PredictionSet
from .ingest import OPTION_COUNT, SIMPLEX_ATOL


@dataclass(frozen=True)
class CoverageReport:
    """Empirical coverage and set-size statistics over an evaluation set."""

    coverage: float
    avg_set_size: float
    empty_set_rate: float
    n_eval: int


@dataclass(frozen=True)
class SizeBucket:
    """Per-set-size tallies; rates are None for empty buckets."""

    count: int
    coverage: float | None
    top1_accuracy: float | None


@dataclass(frozen=True)
class StratifiedReport:
    """Coverage and top-1 accuracy grouped by realized prediction-set size."""

    by_size: Mapping[int, SizeBucket]
    n_eval: int


@dataclass(frozen=True)
class ReliabilityBin:
    lower: float
    upper: float
    count: int
    mean_confidence: float | None
    accuracy: float | None


@dataclass(frozen=True)
class ReliabilityReport:
    """Equal-width confidence bins with expected and maximum calibration error."""

    bins: tuple[ReliabilityBin, ...]
    ece: float
    mce: float


def _check_lengths(sets: Sequence[PredictionSet], labels: Sequence[int]) -> int:
    n = len(sets)
    if n != len(labels):
        raise ValueError(f"length mismatch: {n} sets vs {len(labels)} labels")
    if n == 0:
        raise ValueError("need at least one item")
    return n


def _as_probs_matrix(probs_list: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    mat = np.asarray(probs_list, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != OPTION_COUNT or mat.shape[0] == 0:
        raise ValueError(f"expected a non-empty sequence of {OPTION_COUNT}-vectors, got shape {mat.shape}")
    if np.any(mat < -SIMPLEX_ATOL) or np.any(np.abs(mat.sum(axis=1) - 1.0) > SIMPLEX_ATOL):
        raise ValueError("probability vectors must lie on the simplex")
    return mat


def empirical_coverage(sets: Sequence[PredictionSet], labels: Sequence[int]) -> CoverageReport:
    """Fraction of items whose prediction set contains the true label."""
    n = _check_lengths(sets, labels)
    covered = sum(1 for s, y in zip(sets, labels) if y in s)
    sizes = [len(s) for s in sets]
    return CoverageReport(
        coverage=covered / n,
        avg_set_size=sum(sizes) / n,
        empty_set_rate=sum(1 for size in sizes if size == 0) / n,
        n_eval=n,
    )


def size_stratified_counts(
    sets: Sequence[PredictionSet],
    labels: Sequence[int],
    top1_predictions: Sequence[int],
) -> dict[int, tuple[int, int, int]]:
    """Integer tallies per realized set size: (count, covered, top1 correct).

    Every size 0..4 is present. Exact integer counts pool across batches
    without rounding, which :func:`size_stratified` and the report layer
    rely on.
    """
    n = _check_lengths(sets, labels)
    if len(top1_predictions) != n:
        raise ValueError(f"length mismatch: {n} sets vs {len(top1_predictions)} top-1 predictions")
    tallies = {size: [0, 0, 0] for size in range(OPTION_COUNT + 1)}
    for s, y, top1 in zip(sets, labels, top1_predictions):
        entry = tallies[len(s)]
        entry[0] += 1
        entry[1] += 1 if y in s else 0
        entry[2] += 1 if top1 == y else 0
    return {size: tuple(entry) for size, entry in tallies.items()}  # type: ignore[misc]


def size_stratified(
    sets: Sequence[PredictionSet],
    labels: Sequence[int],
    top1_predictions: Sequence[int],
) -> StratifiedReport:
    """Coverage and top-1 accuracy per realized set size (sizes 0..4)."""
    tallies = size_stratified_counts(sets, labels, top1_predictions)
    by_size = {
        size: SizeBucket(
            count=count,
            coverage=covered / count if count else None,
            top1_accuracy=correct / count if count else None,
        )
        for size, (count, covered, correct) in tallies.items()
    }
    return StratifiedReport(by_size=by_size, n_eval=len(sets))


def top1_predictions(probs_list: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """Argmax label per probability vector; ties go to the lowest index."""
    mat = _as_probs_matrix(probs_list)
    return mat.argmax(axis=1)


def naive_topk_sets(probs_list: Sequence[Sequence[float]] | np.ndarray, k: int) -> list[PredictionSet]:
    """Fixed-size baseline sets of the k highest-probability labels.

    Probability ties break to the lower label index, so k=1 agrees with
    :func:`top1_predictions`.
    """
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= OPTION_COUNT:
        raise ValueError(f"k must be an integer in [1, {OPTION_COUNT}], got {k!r}")
    mat = _as_probs_matrix(probs_list)
    order = np.argsort(-mat, axis=1, kind="stable")
    return [PredictionSet(tuple(sorted(int(y) for y in row[:k]))) for row in order]


def reliability(
    probs_list: Sequence[Sequence[float]] | np.ndarray,
    labels: Sequence[int],
    n_bins: int = 10,
) -> ReliabilityReport:
    """Reliability table on the top-1 confidence, with ECE and MCE.

    Confidence is the maximum probability per item. Bins are equal-width on
    [0, 1]; a value on a bin boundary goes to the higher bin, except 1.0,
    which stays in the last bin. ECE is the count-weighted mean absolute gap
    between bin accuracy and bin mean confidence over non-empty bins; MCE is
    the maximum such gap.
    """
    if isinstance(n_bins, bool) or not isinstance(n_bins, (int, np.integer)) or n_bins < 2:
        raise ValueError(f"n_bins must be an integer >= 2, got {n_bins!r}")
    mat = _as_probs_matrix(probs_list)
    y = np.asarray(labels)
    n = mat.shape[0]
    if y.shape != (n,):
        raise ValueError(f"length mismatch: {n} probability vectors vs {y.shape} labels")

    confidence = mat.max(axis=1)
    correct = mat.argmax(axis=1) == y
    bin_idx = np.minimum((confidence * n_bins).astype(np.int64), n_bins - 1)

    edges = np.arange(n_bins + 1) / n_bins
    bins = []
    gaps = []
    weights = []
    for b in range(n_bins):
        mask = bin_idx == b
        count = int(mask.sum())
        if count == 0:
            bins.append(ReliabilityBin(edges[b], edges[b + 1], 0, None, None))
            continue
        mean_conf = float(confidence[mask].mean())
        acc = float(correct[mask].mean())
        bins.append(ReliabilityBin(edges[b], edges[b + 1], count, mean_conf, acc))
        gaps.append(abs(acc - mean_conf))
        weights.append(count / n)

    ece = float(np.dot(weights, gaps))
    mce = float(max(gaps))
    return ReliabilityReport(bins=tuple(bins), ece=ece, mce=mce)
