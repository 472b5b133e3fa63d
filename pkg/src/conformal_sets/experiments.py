"""Seeded random split trials and the cross-subject coverage matrix.

Every random draw comes from a seed derived with :func:`derive_seed`, so a
(dataset, config) pair always produces bit-identical results, regardless of
how the trials are scheduled. Seed-derivation scheme v1: SHA-256 over
length-prefixed parts, truncated to 64 bits.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .conformal import calibrate_threshold, lac_scores, set_membership
from .errors import DataWarning
from .ingest import Dataset

MIN_ITEMS = 4
SMALL_CALIBRATION = 50

_SEED_SCHEME = b"conformal-sets-seed-v1"


def derive_seed(master_seed: int, *parts: Union[int, str]) -> int:
    """Stable 64-bit seed from a master seed plus context parts (ints or strings)."""
    h = hashlib.sha256()
    h.update(_SEED_SCHEME)
    for part in (master_seed, *parts):
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        data = b"i" + part.to_bytes(16, "big", signed=True) if isinstance(part, int) else b"s" + part.encode("utf-8")
        h.update(len(data).to_bytes(4, "big"))
        h.update(data)
    return int.from_bytes(h.digest()[:8], "big")


def _rng(master_seed: int, *parts: Union[int, str]) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *parts))


@dataclass(frozen=True)
class TrialConfig:
    """Randomized-trial protocol parameters."""

    alpha: float
    n_trials: int = 100
    master_seed: int = 0
    split_fraction: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if isinstance(self.n_trials, bool) or not isinstance(self.n_trials, int) or self.n_trials < 1:
            raise ValueError(f"n_trials must be an integer >= 1, got {self.n_trials!r}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError(f"split_fraction must lie in (0, 1), got {self.split_fraction}")


@dataclass(frozen=True)
class TrialSummary:
    """Mean and sample std of coverage/set-size statistics over trials."""

    mean_coverage: float
    std_coverage: float
    mean_set_size: float
    std_set_size: float
    mean_empty_rate: float
    n_trials: int
    n_cal: int
    n_eval: int


@dataclass(frozen=True)
class CrossMatrix:
    """Mean coverage deviation per (calibration subject, evaluation subject) pair."""

    subjects: tuple[str, ...]
    cells: Mapping[tuple[str, str], float]
    alpha: float
    n_trials: int
    master_seed: int
    split_fraction: float


def _split_sizes(n: int, fraction: float) -> tuple[int, int]:
    n_cal = math.floor(n * fraction)
    return n_cal, n - n_cal


def _trial_stats(
    probs: np.ndarray,
    answers: np.ndarray,
    cal_idx: np.ndarray,
    eval_idx: np.ndarray,
    alpha: float,
) -> tuple[float, float, float]:
    """Coverage, mean set size, and empty-set rate for one calibrate/evaluate split."""
    scores = lac_scores(probs[cal_idx], answers[cal_idx])
    threshold = calibrate_threshold(scores, alpha)
    membership = set_membership(probs[eval_idx], threshold)
    covered = membership[np.arange(eval_idx.size), answers[eval_idx]]
    sizes = membership.sum(axis=1)
    return float(covered.mean()), float(sizes.mean()), float((sizes == 0).mean())


def _summarize(per_trial: np.ndarray, n_trials: int, n_cal: int, n_eval: int) -> TrialSummary:
    coverage, set_size, empty = per_trial
    std_cov = float(np.std(coverage, ddof=1)) if n_trials > 1 else 0.0
    std_size = float(np.std(set_size, ddof=1)) if n_trials > 1 else 0.0
    return TrialSummary(
        mean_coverage=float(np.mean(coverage)),
        std_coverage=std_cov,
        mean_set_size=float(np.mean(set_size)),
        std_set_size=std_size,
        mean_empty_rate=float(np.mean(empty)),
        n_trials=n_trials,
        n_cal=n_cal,
        n_eval=n_eval,
    )


def split_indices(n: int, config: TrialConfig, trial_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint (calibration, evaluation) index halves for one trial.

    Trial i permutes 0..n-1 with a seed derived from
    (master_seed, i, "split"); the first floor(n * split_fraction) positions
    calibrate and the remainder evaluate.
    """
    n_cal, _ = _split_sizes(n, config.split_fraction)
    perm = _rng(config.master_seed, trial_index, "split").permutation(n)
    return perm[:n_cal], perm[n_cal:]


def _split_trial_coverages(dataset: Dataset, config: TrialConfig) -> np.ndarray:
    """(3, n_trials) array of per-trial coverage, set size, and empty rate.

    The cross-subject diagonal reuses this exact path.
    """
    n = len(dataset)
    probs = dataset.probs_matrix()
    answers = dataset.answers()
    out = np.empty((3, config.n_trials), dtype=np.float64)
    for i in range(config.n_trials):
        cal_idx, eval_idx = split_indices(n, config, i)
        out[:, i] = _trial_stats(probs, answers, cal_idx, eval_idx, config.alpha)
    return out


def run_split_trials(dataset: Dataset, config: TrialConfig) -> TrialSummary:
    """Repeated random calibration/evaluation splits of one dataset.

    Each trial splits the items at ``split_fraction``, calibrates a
    threshold on the first part, and scores coverage, set size, and
    empty-set rate on the rest. Fully deterministic given the config.
    """
    n = len(dataset)
    if n < MIN_ITEMS:
        raise ValueError(f"dataset must have at least {MIN_ITEMS} items, got {n}")
    n_cal, n_eval = _split_sizes(n, config.split_fraction)
    if n_cal < SMALL_CALIBRATION:
        warnings.warn(
            f"calibration split has only {n_cal} items (< {SMALL_CALIBRATION}); "
            "per-trial coverage will be noisy",
            DataWarning,
            stacklevel=2,
        )
    per_trial = _split_trial_coverages(dataset, config)
    return _summarize(per_trial, config.n_trials, n_cal, n_eval)


def cross_subject_matrix(
    datasets: Mapping[str, Dataset],
    alpha: float,
    n_trials: int = 100,
    master_seed: int = 0,
    split_fraction: float = 0.5,
) -> CrossMatrix:
    """Coverage deviation for every ordered (calibrate-on, evaluate-on) subject pair.

    Off-diagonal cells calibrate on a random half of the first subject and
    evaluate on a random half of the second, with the two samples drawn from
    independently derived seeds per trial. Diagonal cells split one subject
    into disjoint halves, matching :func:`run_split_trials` exactly. Cell
    values are mean coverage minus (1 - alpha).
    """
    config = TrialConfig(alpha=alpha, n_trials=n_trials, master_seed=master_seed, split_fraction=split_fraction)
    if len(datasets) < 2:
        raise ValueError(f"need at least 2 subjects, got {len(datasets)}")
    for subject, dataset in datasets.items():
        if len(dataset) < MIN_ITEMS:
            raise ValueError(f"subject {subject!r} has {len(dataset)} items; need at least {MIN_ITEMS}")

    subjects = tuple(datasets)
    target = 1.0 - alpha
    cells: dict[tuple[str, str], float] = {}
    for cal_subject in subjects:
        cal_data = datasets[cal_subject]
        n_a = len(cal_data)
        cal_size, _ = _split_sizes(n_a, split_fraction)
        for eval_subject in subjects:
            if cal_subject == eval_subject:
                coverages = _split_trial_coverages(cal_data, config)[0]
                cells[(cal_subject, eval_subject)] = float(np.mean(coverages)) - target
                continue
            eval_data = datasets[eval_subject]
            n_b = len(eval_data)
            _, eval_size = _split_sizes(n_b, split_fraction)
            coverages = np.empty(n_trials, dtype=np.float64)
            for i in range(n_trials):
                cal_idx = _rng(master_seed, i, "cal-subject").permutation(n_a)[:cal_size]
                eval_idx = _rng(master_seed, i, "eval-subject").permutation(n_b)[:eval_size]
                coverages[i] = _cross_trial_coverage(cal_data, eval_data, cal_idx, eval_idx, alpha)
            cells[(cal_subject, eval_subject)] = float(np.mean(coverages)) - target

    return CrossMatrix(
        subjects=subjects,
        cells=cells,
        alpha=alpha,
        n_trials=n_trials,
        master_seed=master_seed,
        split_fraction=split_fraction,
    )


def _cross_trial_coverage(
    cal_data: Dataset,
    eval_data: Dataset,
    cal_idx: np.ndarray,
    eval_idx: np.ndarray,
    alpha: float,
) -> float:
    scores = lac_scores(cal_data.probs_matrix()[cal_idx], cal_data.answers()[cal_idx])
    threshold = calibrate_threshold(scores, alpha)
    membership = set_membership(eval_data.probs_matrix()[eval_idx], threshold)
    covered = membership[np.arange(eval_idx.size), eval_data.answers()[eval_idx]]
    return float(covered.mean())
