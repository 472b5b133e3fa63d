"""Split-conformal calibration and prediction sets for four-option classifiers.

The nonconformity score of a (probability vector, label) pair is one minus
the label's probability. Calibration finds the k-th smallest calibration
score with k = ceil((n + 1) * (1 - alpha)); a test label enters the
prediction set iff its score is <= that threshold. With exchangeable data
this contains the true label with probability at least 1 - alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .ingest import OPTION_COUNT, SIMPLEX_ATOL


class _AboveAll:
    """Sentinel threshold: k exceeded the calibration size, every label qualifies."""

    _instance: "_AboveAll | None" = None
    __slots__ = ()

    def __new__(cls) -> "_AboveAll":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ABOVE_ALL"


ABOVE_ALL = _AboveAll()

_SCORE_ATOL = 1e-9


@dataclass(frozen=True)
class CalibratedThreshold:
    """The calibrated score cutoff for a given error rate.

    ``q_hat`` is either a score in [0, 1] or :data:`ABOVE_ALL`, which occurs
    exactly when ceil((n_cal + 1) * (1 - alpha)) > n_cal and means every
    prediction set is the full label set.
    """

    alpha: float
    q_hat: Union[float, _AboveAll]
    n_cal: int

    @property
    def is_above_all(self) -> bool:
        return self.q_hat is ABOVE_ALL

    @property
    def cutoff(self) -> float:
        """Numeric cutoff for score comparisons; +inf when ABOVE_ALL."""
        return math.inf if self.is_above_all else float(self.q_hat)  # type: ignore[arg-type]


@dataclass(frozen=True)
class PredictionSet:
    """Subset of the option labels {0, 1, 2, 3}, stored in ascending order."""

    labels: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(not 0 <= y < OPTION_COUNT for y in self.labels):
            raise ValueError(f"labels must lie in [0, {OPTION_COUNT - 1}], got {self.labels}")
        if list(self.labels) != sorted(set(self.labels)):
            raise ValueError(f"labels must be strictly ascending, got {self.labels}")

    @classmethod
    def of(cls, members: Iterable[int]) -> "PredictionSet":
        return cls(tuple(sorted(set(members))))

    def __contains__(self, label: int) -> bool:
        return label in self.labels

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def size(self) -> int:
        return len(self.labels)


def _check_simplex_rows(mat: np.ndarray) -> None:
    if np.any(mat < -SIMPLEX_ATOL) or np.any(np.abs(mat.sum(axis=-1) - 1.0) > SIMPLEX_ATOL):
        raise ValueError("probability vectors must lie on the simplex")


def _as_probs_vector(probs: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(probs, dtype=np.float64)
    if arr.shape != (OPTION_COUNT,):
        raise ValueError(f"expected a probability vector of length {OPTION_COUNT}, got shape {arr.shape}")
    _check_simplex_rows(arr)
    return arr


def lac_score(probs: Sequence[float] | np.ndarray, label: int) -> float:
    """Nonconformity of ``label`` under ``probs``: one minus the label's probability."""
    arr = _as_probs_vector(probs)
    if isinstance(label, bool) or not isinstance(label, (int, np.integer)) or not 0 <= label < OPTION_COUNT:
        raise ValueError(f"label must be an integer in [0, {OPTION_COUNT - 1}], got {label!r}")
    return float(1.0 - arr[label])


def lac_scores(probs_matrix: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Vector form of :func:`lac_score` over rows of an (n, 4) matrix."""
    mat = np.asarray(probs_matrix, dtype=np.float64)
    idx = np.asarray(labels)
    if mat.ndim != 2 or mat.shape[1] != OPTION_COUNT or idx.shape != (mat.shape[0],):
        raise ValueError("expected an (n, 4) matrix and a matching label vector")
    _check_simplex_rows(mat)
    if idx.size and (idx.min() < 0 or idx.max() >= OPTION_COUNT):
        raise ValueError(f"labels must lie in [0, {OPTION_COUNT - 1}]")
    return 1.0 - mat[np.arange(mat.shape[0]), idx]


def calibrate_threshold(scores: Sequence[float] | np.ndarray, alpha: float) -> CalibratedThreshold:
    """Finite-sample quantile of the calibration scores.

    Returns the k-th smallest score with k = ceil((n + 1) * (1 - alpha)),
    or :data:`ABOVE_ALL` when k > n.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    arr = np.asarray(scores, dtype=np.float64).ravel()
    n = arr.size
    if n < 1:
        raise ValueError("need at least one calibration score")
    if not np.all(np.isfinite(arr)):
        raise ValueError("calibration scores must be finite")
    if arr.min() < -_SCORE_ATOL or arr.max() > 1.0 + _SCORE_ATOL:
        raise ValueError("calibration scores must lie in [0, 1]")
    k = math.ceil((n + 1) * (1.0 - alpha))
    if k > n:
        return CalibratedThreshold(alpha=alpha, q_hat=ABOVE_ALL, n_cal=n)
    q_hat = float(np.sort(arr)[k - 1])
    return CalibratedThreshold(alpha=alpha, q_hat=q_hat, n_cal=n)


def build_set(probs: Sequence[float] | np.ndarray, threshold: CalibratedThreshold) -> PredictionSet:
    """Labels whose nonconformity score is at or below the threshold (ties included)."""
    arr = _as_probs_vector(probs)
    cutoff = threshold.cutoff
    return PredictionSet(tuple(y for y in range(OPTION_COUNT) if 1.0 - arr[y] <= cutoff))


def set_membership(probs_matrix: np.ndarray, threshold: CalibratedThreshold) -> np.ndarray:
    """Vector form of :func:`build_set`: (n, 4) boolean membership matrix."""
    mat = np.asarray(probs_matrix, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != OPTION_COUNT:
        raise ValueError("expected an (n, 4) probability matrix")
    _check_simplex_rows(mat)
    return (1.0 - mat) <= threshold.cutoff


def build_sets(probs_matrix: np.ndarray, threshold: CalibratedThreshold) -> list[PredictionSet]:
    """Prediction sets for every row of an (n, 4) probability matrix."""
    membership = set_membership(probs_matrix, threshold)
    labels = np.arange(OPTION_COUNT)
    return [PredictionSet(tuple(int(y) for y in labels[row])) for row in membership]
