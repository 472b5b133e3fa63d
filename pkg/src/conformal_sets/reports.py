"""Report serialization: versioned CSV/JSON schemas, run manifests, subject ordering.

Every report is deterministic given the command's flags and inputs; the
manifest records tool version, resolved flags, seed, and input digests so a
run can be reproduced. The manifest timestamp is the only field excluded
from determinism comparisons.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence, Union

from . import __version__
from .conformal import CalibratedThreshold

TOOL_NAME = "conformal-sets"

# Domain groups for the MMLU subjects used in cross-subject reports; the
# matrix orders rows/columns by group, then by name. Unknown subjects sort
# after these, alphabetically.
SUBJECT_GROUPS: dict[str, str] = {
    "college computer science": "computer science",
    "computer security": "computer science",
    "formal logic": "computer science",
    "high school computer science": "computer science",
    "machine learning": "computer science",
    "anatomy": "medicine",
    "clinical knowledge": "medicine",
    "college chemistry": "medicine",
    "college medicine": "medicine",
    "high school biology": "medicine",
    "professional medicine": "medicine",
    "business ethics": "business",
    "management": "business",
    "marketing": "business",
    "professional accounting": "business",
    "public relations": "business",
}

GROUP_ORDER = ("computer science", "medicine", "business", "other")


def subject_sort_key(subject: str) -> tuple[int, str]:
    group = SUBJECT_GROUPS.get(subject, "other")
    return GROUP_ORDER.index(group), subject


def order_subjects(subjects: Sequence[str]) -> list[str]:
    return sorted(subjects, key=subject_sort_key)


def fmt_rate(value: float) -> str:
    """Rates, deviations, and sizes: fixed 4 fractional digits."""
    return f"{value:.4f}"


def fmt_optional_rate(value: float | None) -> str:
    return "" if value is None else fmt_rate(value)


def fmt_score(value: Union[float, object]) -> str:
    """Score-domain values (thresholds): 6 fractional digits or the sentinel name."""
    if isinstance(value, (int, float)):
        return f"{value:.6f}"
    return repr(value)


def sha256_digest(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def build_manifest(
    command: str,
    schema: str,
    flags: Mapping[str, object],
    master_seed: int | None,
    input_paths: Sequence[Union[str, Path]] = (),
) -> dict:
    """Reproducibility sidecar for one command invocation."""
    return {
        "tool": TOOL_NAME,
        "version": __version__,
        "command": command,
        "schema": schema,
        "flags": dict(flags),
        "master_seed": master_seed,
        "inputs": {str(p): sha256_digest(p) for p in input_paths},
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def render_csv(schema: str, header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    buf.write(f"# {TOOL_NAME} {schema}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def render_json(schema: str, manifest: Mapping[str, object], rows: Sequence[Mapping[str, object]]) -> str:
    payload = {"schema": schema, "manifest": manifest, "rows": list(rows)}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def manifest_sidecar_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def emit(
    *,
    schema: str,
    header: Sequence[str],
    csv_rows: Sequence[Sequence[str]],
    json_rows: Sequence[Mapping[str, object]],
    fmt: str,
    out: Path | None,
    manifest: Mapping[str, object],
    table_text: str | None = None,
) -> None:
    """Write one report in the requested format.

    CSV and table formats keep the manifest separate (sidecar file next to
    ``--out``, or stderr when printing); JSON embeds it.
    """
    if fmt == "json":
        text = render_json(schema, manifest, json_rows)
        if out is None:
            sys.stdout.write(text)
        else:
            out.write_text(text, encoding="utf-8")
        return
    if fmt == "table":
        if table_text is None:
            raise ValueError(f"schema {schema} has no table view")
        text = table_text
    else:
        text = render_csv(schema, header, csv_rows)
    manifest_text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
        sys.stderr.write(manifest_text)
    else:
        out.write_text(text, encoding="utf-8")
        manifest_sidecar_path(out).write_text(manifest_text, encoding="utf-8")


def threshold_rows(threshold: CalibratedThreshold) -> tuple[list[str], list[list[str]], list[dict]]:
    header = ["alpha", "q_hat", "n_cal"]
    q_csv = "ABOVE_ALL" if threshold.is_above_all else f"{threshold.q_hat:.6f}"
    q_json: object = "ABOVE_ALL" if threshold.is_above_all else threshold.q_hat
    csv_rows = [[fmt_rate(threshold.alpha), q_csv, str(threshold.n_cal)]]
    json_rows = [{"alpha": threshold.alpha, "q_hat": q_json, "n_cal": threshold.n_cal}]
    return header, csv_rows, json_rows


TRIALS_HEADER = [
    "subject",
    "alpha",
    "n_trials",
    "n_cal",
    "n_eval",
    "mean_coverage",
    "std_coverage",
    "mean_set_size",
    "std_set_size",
    "mean_empty_rate",
]


def trials_rows(results: Sequence[tuple[str, float, object]]) -> tuple[list[list[str]], list[dict]]:
    """Rows for (subject, alpha, TrialSummary) triples."""
    csv_rows = []
    json_rows = []
    for subject, alpha, summary in results:
        csv_rows.append(
            [
                subject,
                fmt_rate(alpha),
                str(summary.n_trials),
                str(summary.n_cal),
                str(summary.n_eval),
                fmt_rate(summary.mean_coverage),
                fmt_rate(summary.std_coverage),
                fmt_rate(summary.mean_set_size),
                fmt_rate(summary.std_set_size),
                fmt_rate(summary.mean_empty_rate),
            ]
        )
        json_rows.append(
            {
                "subject": subject,
                "alpha": alpha,
                "n_trials": summary.n_trials,
                "n_cal": summary.n_cal,
                "n_eval": summary.n_eval,
                "mean_coverage": summary.mean_coverage,
                "std_coverage": summary.std_coverage,
                "mean_set_size": summary.mean_set_size,
                "std_set_size": summary.std_set_size,
                "mean_empty_rate": summary.mean_empty_rate,
            }
        )
    return csv_rows, json_rows


def trials_table(results: Sequence[tuple[str, float, object]]) -> str:
    """Human-readable view with percent-style rounding."""
    width = max([len("subject")] + [len(s) for s, _, _ in results])
    lines = [f"{'subject':<{width}}  {'1-alpha':>7}  {'coverage':>12}  {'set size':>12}"]
    for subject, alpha, summary in results:
        target = f"{round((1 - alpha) * 100)}%"
        coverage = f"{round(summary.mean_coverage * 100)}% ± {round(summary.std_coverage * 100)}%"
        size = f"{summary.mean_set_size:.1f} ± {summary.std_set_size:.1f}"
        lines.append(f"{subject:<{width}}  {target:>7}  {coverage:>12}  {size:>12}")
    return "\n".join(lines) + "\n"


def cross_matrix_rows(matrix) -> tuple[list[str], list[list[str]], list[dict]]:
    """Square CSV (rows calibrate, columns evaluate) plus one JSON row per cell."""
    subjects = order_subjects(matrix.subjects)
    header = ["cal_subject"] + subjects
    csv_rows = []
    json_rows = []
    for cal_subject in subjects:
        row = [cal_subject]
        for eval_subject in subjects:
            deviation = matrix.cells[(cal_subject, eval_subject)]
            row.append(fmt_rate(deviation))
            json_rows.append(
                {
                    "cal_subject": cal_subject,
                    "eval_subject": eval_subject,
                    "deviation": deviation,
                }
            )
        csv_rows.append(row)
    return header, csv_rows, json_rows


RELIABILITY_HEADER = [
    "subject",
    "bin_index",
    "bin_lower",
    "bin_upper",
    "count",
    "mean_confidence",
    "accuracy",
    "ece",
    "mce",
]


def reliability_rows(per_subject: Sequence[tuple[str, object]]) -> tuple[list[list[str]], list[dict]]:
    csv_rows = []
    json_rows = []
    for subject, report in per_subject:
        for index, b in enumerate(report.bins):
            csv_rows.append(
                [
                    subject,
                    str(index),
                    fmt_rate(b.lower),
                    fmt_rate(b.upper),
                    str(b.count),
                    fmt_optional_rate(b.mean_confidence),
                    fmt_optional_rate(b.accuracy),
                    fmt_rate(report.ece),
                    fmt_rate(report.mce),
                ]
            )
            json_rows.append(
                {
                    "subject": subject,
                    "bin_index": index,
                    "bin_lower": b.lower,
                    "bin_upper": b.upper,
                    "count": b.count,
                    "mean_confidence": b.mean_confidence,
                    "accuracy": b.accuracy,
                    "ece": report.ece,
                    "mce": report.mce,
                }
            )
    return csv_rows, json_rows


STRATIFIED_HEADER = ["subject", "alpha", "kind", "key", "count", "coverage", "top1_accuracy"]


def stratified_rows(
    subject: str,
    alpha: float,
    size_tallies: Mapping[int, tuple[int, int, int]],
    topk_tallies: Mapping[int, tuple[int, int]],
) -> tuple[list[list[str]], list[dict]]:
    """Pooled per-size rows followed by naive top-k rows for one subject."""
    csv_rows = []
    json_rows = []
    for size in sorted(size_tallies):
        count, covered, correct = size_tallies[size]
        coverage = covered / count if count else None
        top1 = correct / count if count else None
        csv_rows.append(
            [
                subject,
                fmt_rate(alpha),
                "set_size",
                str(size),
                str(count),
                fmt_optional_rate(coverage),
                fmt_optional_rate(top1),
            ]
        )
        json_rows.append(
            {
                "subject": subject,
                "alpha": alpha,
                "kind": "set_size",
                "key": size,
                "count": count,
                "coverage": coverage,
                "top1_accuracy": top1,
            }
        )
    for k in sorted(topk_tallies):
        count, covered = topk_tallies[k]
        coverage = covered / count if count else None
        csv_rows.append(
            [subject, fmt_rate(alpha), "top_k", str(k), str(count), fmt_optional_rate(coverage), ""]
        )
        json_rows.append(
            {
                "subject": subject,
                "alpha": alpha,
                "kind": "top_k",
                "key": k,
                "count": count,
                "coverage": coverage,
                "top1_accuracy": None,
            }
        )
    return csv_rows, json_rows


SYNTH_CHECK_HEADER = [
    "check",
    "alpha",
    "temperature",
    "concentration",
    "n_trials",
    "n_cal",
    "n_eval",
    "mean_coverage",
    "band_low",
    "band_high",
    "deviation",
    "passed",
]


def synth_check_rows(results: Sequence[object]) -> tuple[list[list[str]], list[dict]]:
    from .synthetic import CoverageCheckResult, ShiftCheckResult

    csv_rows = []
    json_rows = []
    for result in results:
        if isinstance(result, CoverageCheckResult):
            csv_rows.append(
                [
                    "exchangeable-band",
                    fmt_rate(result.alpha),
                    "",
                    "",
                    str(result.n_trials),
                    str(result.n_cal),
                    str(result.n_eval),
                    fmt_rate(result.mean_coverage),
                    fmt_rate(result.band_low),
                    fmt_rate(result.band_high),
                    "",
                    str(result.passed).lower(),
                ]
            )
            json_rows.append(
                {
                    "check": "exchangeable-band",
                    "alpha": result.alpha,
                    "temperature": None,
                    "concentration": None,
                    "n_trials": result.n_trials,
                    "n_cal": result.n_cal,
                    "n_eval": result.n_eval,
                    "mean_coverage": result.mean_coverage,
                    "band_low": result.band_low,
                    "band_high": result.band_high,
                    "deviation": None,
                    "passed": result.passed,
                }
            )
        elif isinstance(result, ShiftCheckResult):
            csv_rows.append(
                [
                    f"shift-{result.kind.value}",
                    fmt_rate(result.alpha),
                    fmt_rate(result.temperature),
                    fmt_rate(result.concentration),
                    str(result.n_trials),
                    "",
                    "",
                    fmt_rate(result.mean_coverage),
                    "",
                    "",
                    fmt_rate(result.deviation),
                    str(result.passed).lower(),
                ]
            )
            json_rows.append(
                {
                    "check": f"shift-{result.kind.value}",
                    "alpha": result.alpha,
                    "temperature": result.temperature,
                    "concentration": result.concentration,
                    "n_trials": result.n_trials,
                    "n_cal": None,
                    "n_eval": None,
                    "mean_coverage": result.mean_coverage,
                    "band_low": None,
                    "band_high": None,
                    "deviation": result.deviation,
                    "passed": result.passed,
                }
            )
        else:
            raise TypeError(f"unexpected check result {type(result).__name__}")
    return csv_rows, json_rows
