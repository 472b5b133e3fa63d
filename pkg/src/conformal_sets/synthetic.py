"""Synthetic exchangeable and shifted datasets with known properties.

The generator draws each question's probability vector from a symmetric
simplex distribution and then draws the true label from that same vector,
so the reported probabilities are exactly the conditional label law: the
classifier is perfectly calibrated and items are exchangeable. Shifted
variants distort the reported vector after the label is drawn, which breaks
the score/label relationship the way a domain change does.

Simplex family (fixed, v1): p_i = exp(s_i) / sum_j exp(s_j) with
s_i = log(E_i) / concentration and E_i i.i.d. unit-scale exponential noise.
Small concentrations give peaked vectors; concentration -> infinity gives
the uniform vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .conformal import calibrate_threshold, lac_scores, set_membership
from .experiments import derive_seed
from .ingest import Dataset, QuestionScores

DEFAULT_SHIFT_CONCENTRATION = 0.05
DEFAULT_SHARPEN_TEMPERATURE = 0.5
DEFAULT_FLATTEN_TEMPERATURE = 2.0


class GeneratorKind(str, Enum):
    CALIBRATED = "calibrated"
    SHARPENED = "sharpened"
    FLATTENED = "flattened"


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of one synthetic dataset draw."""

    kind: GeneratorKind
    n_items: int
    seed: int
    concentration: float = 1.0
    temperature: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.kind, GeneratorKind):
            raise ValueError(f"kind must be a GeneratorKind, got {self.kind!r}")
        if isinstance(self.n_items, bool) or not isinstance(self.n_items, int) or self.n_items < 1:
            raise ValueError(f"n_items must be an integer >= 1, got {self.n_items!r}")
        if not (math.isfinite(self.concentration) and self.concentration > 0):
            raise ValueError(f"concentration must be a positive real, got {self.concentration!r}")
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError(f"temperature must be a positive real, got {self.temperature!r}")
        if self.kind is GeneratorKind.CALIBRATED and self.temperature != 1.0:
            raise ValueError("CALIBRATED generators use temperature 1 identically")
        if self.kind is GeneratorKind.SHARPENED and self.temperature > 1.0:
            raise ValueError("SHARPENED requires temperature <= 1")
        if self.kind is GeneratorKind.FLATTENED and self.temperature < 1.0:
            raise ValueError("FLATTENED requires temperature >= 1")


def sample_probability_vectors(rng: np.random.Generator, n_items: int, concentration: float) -> np.ndarray:
    """(n, 4) simplex samples from the fixed family documented above."""
    noise = rng.exponential(size=(n_items, 4))
    with np.errstate(divide="ignore"):
        scores = np.log(noise) / concentration
    scores -= scores.max(axis=1, keepdims=True)
    w = np.exp(scores)
    return w / w.sum(axis=1, keepdims=True)


def draw_labels(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One categorical label per row, drawn from that row's probabilities."""
    cdf = np.cumsum(probs, axis=1)
    cdf /= cdf[:, -1:]
    u = rng.random(probs.shape[0])
    return (cdf <= u[:, None]).sum(axis=1)


def temperature_transform(probs: np.ndarray, temperature: float) -> np.ndarray:
    """Raise probabilities to 1/temperature and renormalize (log-space, stable)."""
    with np.errstate(divide="ignore"):
        scaled = np.log(probs) / temperature
    scaled -= scaled.max(axis=1, keepdims=True)
    w = np.exp(scaled)
    return w / w.sum(axis=1, keepdims=True)


def _generate_arrays(spec: GeneratorSpec) -> tuple[np.ndarray, np.ndarray]:
    """(reported probs, labels) for a spec; labels always come from the undistorted vectors."""
    rng = np.random.default_rng(spec.seed)
    probs = sample_probability_vectors(rng, spec.n_items, spec.concentration)
    labels = draw_labels(rng, probs)
    # temperature 1 must be bit-identical to CALIBRATED, so skip the transform
    if spec.kind is not GeneratorKind.CALIBRATED and spec.temperature != 1.0:
        probs = temperature_transform(probs, spec.temperature)
    return probs, labels


def _to_dataset(probs: np.ndarray, labels: np.ndarray, subject: str) -> Dataset:
    width = max(1, len(str(probs.shape[0] - 1)))
    return Dataset(
        QuestionScores(
            question_id=f"q{i:0{width}d}",
            subject=subject,
            probs=(float(row[0]), float(row[1]), float(row[2]), float(row[3])),
            answer=int(labels[i]),
        )
        for i, row in enumerate(probs)
    )


def gen_calibrated(spec: GeneratorSpec, subject: str = "synthetic") -> Dataset:
    """Perfectly calibrated exchangeable dataset."""
    if spec.kind is not GeneratorKind.CALIBRATED:
        raise ValueError(f"gen_calibrated requires kind CALIBRATED, got {spec.kind.value}")
    probs, labels = _generate_arrays(spec)
    return _to_dataset(probs, labels, subject)


def gen_shifted(spec: GeneratorSpec, subject: str = "synthetic") -> Dataset:
    """Dataset whose reported probabilities are temperature-distorted after label draw."""
    if spec.kind is GeneratorKind.CALIBRATED:
        raise ValueError("gen_shifted requires kind SHARPENED or FLATTENED")
    probs, labels = _generate_arrays(spec)
    return _to_dataset(probs, labels, subject)


def generate(spec: GeneratorSpec, subject: str = "synthetic") -> Dataset:
    """Dispatch to :func:`gen_calibrated` or :func:`gen_shifted` by kind."""
    if spec.kind is GeneratorKind.CALIBRATED:
        return gen_calibrated(spec, subject)
    return gen_shifted(spec, subject)


@dataclass(frozen=True)
class CoverageCheckResult:
    """Outcome of the exchangeable coverage-band check."""

    alpha: float
    n_trials: int
    n_cal: int
    n_eval: int
    mean_coverage: float
    band_low: float
    band_high: float
    passed: bool


@dataclass(frozen=True)
class ShiftCheckResult:
    """Outcome of a shift-direction check against the calibrated baseline."""

    kind: GeneratorKind
    temperature: float
    concentration: float
    alpha: float
    n_trials: int
    mean_coverage: float
    deviation: float
    min_magnitude: float
    passed: bool


def _mc_coverage(
    alpha: float,
    n_trials: int,
    n_cal: int,
    n_eval: int,
    concentration: float,
    master_seed: int,
    eval_kind: GeneratorKind,
    eval_temperature: float,
) -> float:
    """Mean coverage over trials: calibrate on one fresh calibrated draw, evaluate on another."""
    coverages = np.empty(n_trials, dtype=np.float64)
    for i in range(n_trials):
        rng_cal = np.random.default_rng(derive_seed(master_seed, i, "synth-cal"))
        cal_probs = sample_probability_vectors(rng_cal, n_cal, concentration)
        cal_labels = draw_labels(rng_cal, cal_probs)
        threshold = calibrate_threshold(lac_scores(cal_probs, cal_labels), alpha)

        rng_eval = np.random.default_rng(derive_seed(master_seed, i, "synth-eval"))
        eval_probs = sample_probability_vectors(rng_eval, n_eval, concentration)
        eval_labels = draw_labels(rng_eval, eval_probs)
        if eval_kind is not GeneratorKind.CALIBRATED and eval_temperature != 1.0:
            eval_probs = temperature_transform(eval_probs, eval_temperature)

        membership = set_membership(eval_probs, threshold)
        coverages[i] = membership[np.arange(n_eval), eval_labels].mean()
    return float(np.mean(coverages))


def exchangeability_check(
    alpha: float,
    *,
    n_trials: int = 1000,
    n_cal: int = 100,
    n_eval: int = 100,
    concentration: float = 1.0,
    master_seed: int = 0,
    tolerance: float = 0.01,
) -> CoverageCheckResult:
    """Verify the coverage guarantee on exchangeable synthetic data.

    Mean coverage over trials must land in
    [1 - alpha, 1 - alpha + 1/(n_cal + 1)] widened by the Monte Carlo
    tolerance on both sides.
    """
    mean_coverage = _mc_coverage(
        alpha, n_trials, n_cal, n_eval, concentration, master_seed, GeneratorKind.CALIBRATED, 1.0
    )
    band_low = (1.0 - alpha) - tolerance
    band_high = (1.0 - alpha) + 1.0 / (n_cal + 1) + tolerance
    return CoverageCheckResult(
        alpha=alpha,
        n_trials=n_trials,
        n_cal=n_cal,
        n_eval=n_eval,
        mean_coverage=mean_coverage,
        band_low=band_low,
        band_high=band_high,
        passed=band_low <= mean_coverage <= band_high,
    )


def shift_direction_check(
    kind: GeneratorKind,
    *,
    alpha: float = 0.1,
    temperature: float | None = None,
    n_trials: int = 1000,
    n_cal: int = 100,
    n_eval: int = 100,
    concentration: float = DEFAULT_SHIFT_CONCENTRATION,
    master_seed: int = 0,
    min_magnitude: float = 0.02,
) -> ShiftCheckResult:
    """Verify that a score shift moves coverage in the expected direction.

    The threshold is calibrated on exchangeable data; evaluation data has
    its reported probabilities flattened (coverage must drop at least
    ``min_magnitude`` below 1 - alpha) or sharpened (coverage must rise at
    least that far above).

    These directions hold when threshold-marginal items have true-label
    probability above the uniform level, which requires a peaked generator;
    hence the small default concentration. Diffuse generators (roughly
    concentration > 0.15 at alpha = 0.1) move coverage the other way.
    """
    if kind is GeneratorKind.CALIBRATED:
        raise ValueError("shift_direction_check requires kind SHARPENED or FLATTENED")
    if temperature is None:
        temperature = (
            DEFAULT_SHARPEN_TEMPERATURE if kind is GeneratorKind.SHARPENED else DEFAULT_FLATTEN_TEMPERATURE
        )
    # validate the (kind, temperature) pairing
    GeneratorSpec(kind=kind, n_items=1, seed=0, concentration=concentration, temperature=temperature)
    mean_coverage = _mc_coverage(alpha, n_trials, n_cal, n_eval, concentration, master_seed, kind, temperature)
    deviation = mean_coverage - (1.0 - alpha)
    if kind is GeneratorKind.FLATTENED:
        passed = deviation <= -min_magnitude
    else:
        passed = deviation >= min_magnitude
    return ShiftCheckResult(
        kind=kind,
        temperature=temperature,
        concentration=concentration,
        alpha=alpha,
        n_trials=n_trials,
        mean_coverage=mean_coverage,
        deviation=deviation,
        min_magnitude=min_magnitude,
        passed=passed,
    )
