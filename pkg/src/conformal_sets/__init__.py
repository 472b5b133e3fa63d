"""Split conformal prediction sets for four-option multiple-choice logits.

Calibrates prediction-set thresholds with a finite-sample coverage
guarantee from precomputed model logits, evaluates coverage / set-size /
calibration metrics, and runs seeded randomized-split and cross-subject
experiments, all verified against synthetic exchangeable generators.
"""

__version__ = "0.1.0"

from .conformal import (
    ABOVE_ALL,
    CalibratedThreshold,
    PredictionSet,
    build_set,
    build_sets,
    calibrate_threshold,
    lac_score,
    lac_scores,
    set_membership,
)
from .errors import DataError, DataWarning
from .experiments import (
    CrossMatrix,
    TrialConfig,
    TrialSummary,
    cross_subject_matrix,
    derive_seed,
    run_split_trials,
)
from .ingest import (
    Dataset,
    LogitRecord,
    QuestionScores,
    aggregate_prompts,
    load_records,
    softmax,
    write_jsonl,
)
from .metrics import (
    CoverageReport,
    ReliabilityBin,
    ReliabilityReport,
    SizeBucket,
    StratifiedReport,
    empirical_coverage,
    naive_topk_sets,
    reliability,
    size_stratified,
    size_stratified_counts,
    top1_predictions,
)
from .synthetic import (
    CoverageCheckResult,
    GeneratorKind,
    GeneratorSpec,
    ShiftCheckResult,
    exchangeability_check,
    gen_calibrated,
    gen_shifted,
    generate,
    shift_direction_check,
)

__all__ = [
    "ABOVE_ALL",
    "CalibratedThreshold",
    "CoverageCheckResult",
    "CoverageReport",
    "CrossMatrix",
    "DataError",
    "DataWarning",
    "Dataset",
    "GeneratorKind",
    "GeneratorSpec",
    "LogitRecord",
    "PredictionSet",
    "QuestionScores",
    "ReliabilityBin",
    "ReliabilityReport",
    "ShiftCheckResult",
    "SizeBucket",
    "StratifiedReport",
    "TrialConfig",
    "TrialSummary",
    "aggregate_prompts",
    "build_set",
    "build_sets",
    "calibrate_threshold",
    "cross_subject_matrix",
    "derive_seed",
    "empirical_coverage",
    "exchangeability_check",
    "gen_calibrated",
    "gen_shifted",
    "generate",
    "lac_score",
    "lac_scores",
    "load_records",
    "naive_topk_sets",
    "reliability",
    "run_split_trials",
    "set_membership",
    "shift_direction_check",
    "size_stratified",
    "size_stratified_counts",
    "softmax",
    "top1_predictions",
    "write_jsonl",
]
