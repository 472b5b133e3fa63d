"""Command-line surface: calibrate, trials, cross-matrix, reliability, stratified, synth-check.

Reports are CSV by default (``--format json`` for machine embedding; the
trials command also offers ``--format table``). Every run is deterministic
given its flags and ``--seed``; a JSON manifest with input digests
accompanies each report. Exit codes: 0 success, 2 usage error, 3 input
validation error, 4 property-check failure. The CONFORMAL_SETS_THREADS
environment variable caps per-subject parallelism.
"""

from __future__ import annotations

from pathlib import Path

import click

from . import __version__
from .conformal import build_sets, calibrate_threshold, lac_scores
from .errors import DataError
from .experiments import TrialConfig, cross_subject_matrix, run_split_trials, split_indices
from .ingest import Dataset, load_records
from .metrics import naive_topk_sets, size_stratified_counts, top1_predictions
from .metrics import reliability as reliability_metric
from .parallel import max_workers, parallel_map
from .reports import (
    RELIABILITY_HEADER,
    STRATIFIED_HEADER,
    SYNTH_CHECK_HEADER,
    TOOL_NAME,
    TRIALS_HEADER,
    build_manifest,
    cross_matrix_rows,
    emit,
    order_subjects,
    reliability_rows,
    stratified_rows,
    synth_check_rows,
    threshold_rows,
    trials_rows,
    trials_table,
)
from .synthetic import GeneratorKind, exchangeability_check, shift_direction_check

ALPHA = click.FloatRange(0.0, 1.0, min_open=True, max_open=True)


class DataFileError(click.ClickException):
    """Input could not be read or failed validation."""

    exit_code = 3


class CheckFailure(click.ClickException):
    """A verified property did not hold."""

    exit_code = 4


def _load(path: Path) -> Dataset:
    try:
        return load_records(path)
    except OSError as exc:
        raise DataFileError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except DataError as exc:
        raise DataFileError(f"{path}: {exc}") from exc


def _parse_subject_filter(raw: tuple[str, ...]) -> list[str]:
    names = []
    for chunk in raw:
        names.extend(name.strip() for name in chunk.split(",") if name.strip())
    return names


def _select_subjects(dataset: Dataset, subject_filter: tuple[str, ...]) -> dict[str, Dataset]:
    """Per-subject datasets, honoring the filter; unknown names warn and are skipped."""
    per_subject = dataset.split_by_subject()
    requested = _parse_subject_filter(subject_filter)
    if not requested:
        return per_subject
    selected = {}
    for name in requested:
        if name in per_subject:
            selected[name] = per_subject[name]
        else:
            click.echo(f"warning: subject {name!r} not in input; skipping", err=True)
    if not selected:
        raise DataFileError("none of the requested subjects are present in the input")
    return selected


input_option = click.option(
    "--input",
    "input_path",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="JSON-Lines logit file.",
)
trials_option = click.option(
    "--trials", type=click.IntRange(min=1), default=100, show_default=True, help="Number of random trials."
)
seed_option = click.option(
    "--seed", type=int, default=0, show_default=True, help="Master seed; all randomness derives from it."
)
subjects_option = click.option(
    "--subjects",
    multiple=True,
    help="Subject filter (repeatable or comma-separated). Missing names warn and are skipped.",
)
out_option = click.option(
    "--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Write the report here."
)


def format_option(*choices: str):
    return click.option(
        "--format", "fmt", type=click.Choice(choices), default="csv", show_default=True, help="Report format."
    )


@click.group(name=TOOL_NAME)
@click.version_option(__version__, prog_name=TOOL_NAME)
def main() -> None:
    """Conformal prediction sets over four-option multiple-choice logits."""
    try:
        max_workers()
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


@main.command()
@input_option
@click.option("--alpha", type=ALPHA, default=0.1, show_default=True, help="Target error rate.")
@click.option("--subject", default=None, help="Calibrate on this subject only.")
@format_option("csv", "json")
@out_option
def calibrate(input_path: Path, alpha: float, subject: str | None, fmt: str, out: Path | None) -> None:
    """Calibrate a score threshold on an entire logit file."""
    dataset = _load(input_path)
    if subject is not None:
        try:
            dataset = dataset.subset(subject)
        except DataError as exc:
            raise DataFileError(str(exc)) from exc
    try:
        scores = lac_scores(dataset.probs_matrix(), dataset.answers())
        threshold = calibrate_threshold(scores, alpha)
    except ValueError as exc:
        raise DataFileError(str(exc)) from exc
    header, csv_rows, json_rows = threshold_rows(threshold)
    manifest = build_manifest(
        "calibrate",
        "calibrate-v1",
        {"input": str(input_path), "alpha": alpha, "subject": subject, "format": fmt, "out": str(out) if out else None},
        master_seed=None,
        input_paths=[input_path],
    )
    emit(
        schema="calibrate-v1",
        header=header,
        csv_rows=csv_rows,
        json_rows=json_rows,
        fmt=fmt,
        out=out,
        manifest=manifest,
    )


@main.command()
@input_option
@click.option(
    "--alpha",
    "alphas",
    type=ALPHA,
    multiple=True,
    default=(0.1,),
    show_default=True,
    help="Target error rate (repeatable).",
)
@trials_option
@seed_option
@subjects_option
@click.option(
    "--per-subject/--pooled",
    "per_subject",
    default=True,
    show_default=True,
    help="One row per subject, or pool all items into one dataset.",
)
@format_option("csv", "json", "table")
@out_option
def trials(
    input_path: Path,
    alphas: tuple[float, ...],
    trials: int,
    seed: int,
    subjects: tuple[str, ...],
    per_subject: bool,
    fmt: str,
    out: Path | None,
) -> None:
    """Random-split trials: mean and std of coverage and set size."""
    dataset = _load(input_path)
    selected = _select_subjects(dataset, subjects)
    if per_subject:
        named = [(name, selected[name]) for name in order_subjects(list(selected))]
    else:
        named = [("all", Dataset(item for ds in selected.values() for item in ds))]

    tasks = [(name, ds, alpha) for name, ds in named for alpha in alphas]

    def one(task: tuple[str, Dataset, float]):
        name, ds, alpha = task
        try:
            summary = run_split_trials(ds, TrialConfig(alpha=alpha, n_trials=trials, master_seed=seed))
        except ValueError as exc:
            raise DataFileError(f"subject {name!r}: {exc}") from exc
        return name, alpha, summary

    results = parallel_map(one, tasks)
    csv_rows, json_rows = trials_rows(results)
    manifest = build_manifest(
        "trials",
        "trials-v1",
        {
            "input": str(input_path),
            "alpha": list(alphas),
            "trials": trials,
            "seed": seed,
            "subjects": _parse_subject_filter(subjects),
            "per_subject": per_subject,
            "format": fmt,
            "out": str(out) if out else None,
        },
        master_seed=seed,
        input_paths=[input_path],
    )
    emit(
        schema="trials-v1",
        header=TRIALS_HEADER,
        csv_rows=csv_rows,
        json_rows=json_rows,
        fmt=fmt,
        out=out,
        manifest=manifest,
        table_text=trials_table(results),
    )


@main.command("cross-matrix")
@input_option
@click.option("--alpha", type=ALPHA, default=0.1, show_default=True, help="Target error rate.")
@trials_option
@seed_option
@subjects_option
@format_option("csv", "json")
@out_option
def cross_matrix(
    input_path: Path,
    alpha: float,
    trials: int,
    seed: int,
    subjects: tuple[str, ...],
    fmt: str,
    out: Path | None,
) -> None:
    """Coverage deviation for every (calibrate-on, evaluate-on) subject pair."""
    dataset = _load(input_path)
    selected = _select_subjects(dataset, subjects)
    if len(selected) < 2:
        raise click.UsageError("cross-matrix needs an input with at least 2 subjects")
    ordered = {name: selected[name] for name in order_subjects(list(selected))}
    try:
        matrix = cross_subject_matrix(ordered, alpha=alpha, n_trials=trials, master_seed=seed)
    except ValueError as exc:
        raise DataFileError(str(exc)) from exc
    header, csv_rows, json_rows = cross_matrix_rows(matrix)
    manifest = build_manifest(
        "cross-matrix",
        "cross-matrix-v1",
        {
            "input": str(input_path),
            "alpha": alpha,
            "trials": trials,
            "seed": seed,
            "subjects": _parse_subject_filter(subjects),
            "format": fmt,
            "out": str(out) if out else None,
        },
        master_seed=seed,
        input_paths=[input_path],
    )
    emit(
        schema="cross-matrix-v1",
        header=header,
        csv_rows=csv_rows,
        json_rows=json_rows,
        fmt=fmt,
        out=out,
        manifest=manifest,
    )


@main.command()
@input_option
@click.option("--bins", type=click.IntRange(min=2), default=10, show_default=True, help="Confidence bins.")
@subjects_option
@format_option("csv", "json")
@out_option
def reliability(
    input_path: Path, bins: int, subjects: tuple[str, ...], fmt: str, out: Path | None
) -> None:
    """Per-subject reliability bins with ECE and MCE."""
    dataset = _load(input_path)
    selected = _select_subjects(dataset, subjects)
    names = order_subjects(list(selected))

    def one(name: str):
        ds = selected[name]
        return name, reliability_metric(ds.probs_matrix(), ds.answers(), n_bins=bins)

    per_subject = parallel_map(one, names)
    csv_rows, json_rows = reliability_rows(per_subject)
    manifest = build_manifest(
        "reliability",
        "reliability-v1",
        {
            "input": str(input_path),
            "bins": bins,
            "subjects": _parse_subject_filter(subjects),
            "format": fmt,
            "out": str(out) if out else None,
        },
        master_seed=None,
        input_paths=[input_path],
    )
    emit(
        schema="reliability-v1",
        header=RELIABILITY_HEADER,
        csv_rows=csv_rows,
        json_rows=json_rows,
        fmt=fmt,
        out=out,
        manifest=manifest,
    )


@main.command()
@input_option
@click.option("--alpha", type=ALPHA, default=0.1, show_default=True, help="Target error rate.")
@trials_option
@seed_option
@subjects_option
@format_option("csv", "json")
@out_option
def stratified(
    input_path: Path,
    alpha: float,
    trials: int,
    seed: int,
    subjects: tuple[str, ...],
    fmt: str,
    out: Path | None,
) -> None:
    """Per-size coverage and top-1 accuracy, pooled over trials, plus naive top-k baselines."""
    dataset = _load(input_path)
    selected = _select_subjects(dataset, subjects)
    names = order_subjects(list(selected))
    config_probe = TrialConfig(alpha=alpha, n_trials=trials, master_seed=seed)

    def one(name: str):
        ds = selected[name]
        n = len(ds)
        if n < 4:
            raise DataFileError(f"subject {name!r} has {n} items; need at least 4")
        probs = ds.probs_matrix()
        answers = ds.answers()
        size_tallies = {s: [0, 0, 0] for s in range(5)}
        topk_tallies = {k: [0, 0] for k in range(1, 5)}
        for i in range(trials):
            cal_idx, eval_idx = split_indices(n, config_probe, i)
            threshold = calibrate_threshold(lac_scores(probs[cal_idx], answers[cal_idx]), alpha)
            eval_probs = probs[eval_idx]
            eval_answers = answers[eval_idx]
            sets = build_sets(eval_probs, threshold)
            top1 = top1_predictions(eval_probs)
            for size, (count, covered, correct) in size_stratified_counts(
                sets, eval_answers.tolist(), top1.tolist()
            ).items():
                size_tallies[size][0] += count
                size_tallies[size][1] += covered
                size_tallies[size][2] += correct
            for k in range(1, 5):
                naive = naive_topk_sets(eval_probs, k)
                topk_tallies[k][0] += len(naive)
                topk_tallies[k][1] += sum(1 for s, y in zip(naive, eval_answers) if int(y) in s)
        return name, {s: tuple(v) for s, v in size_tallies.items()}, {k: tuple(v) for k, v in topk_tallies.items()}

    csv_rows = []
    json_rows = []
    for name, size_tallies, topk_tallies in parallel_map(one, names):
        rows_csv, rows_json = stratified_rows(name, alpha, size_tallies, topk_tallies)
        csv_rows.extend(rows_csv)
        json_rows.extend(rows_json)
    manifest = build_manifest(
        "stratified",
        "stratified-v1",
        {
            "input": str(input_path),
            "alpha": alpha,
            "trials": trials,
            "seed": seed,
            "subjects": _parse_subject_filter(subjects),
            "format": fmt,
            "out": str(out) if out else None,
        },
        master_seed=seed,
        input_paths=[input_path],
    )
    emit(
        schema="stratified-v1",
        header=STRATIFIED_HEADER,
        csv_rows=csv_rows,
        json_rows=json_rows,
        fmt=fmt,
        out=out,
        manifest=manifest,
    )


@main.command("synth-check")
@click.option(
    "--alpha",
    "alphas",
    type=ALPHA,
    multiple=True,
    default=(0.1, 0.2),
    show_default=True,
    help="Error rates to verify (repeatable).",
)
@trials_option
@seed_option
@click.option(
    "--shift",
    "shifts",
    type=click.Choice([GeneratorKind.FLATTENED.value, GeneratorKind.SHARPENED.value]),
    multiple=True,
    help="Also verify coverage moves the right way under this score shift (repeatable).",
)
@format_option("csv", "json")
@out_option
def synth_check(
    alphas: tuple[float, ...],
    trials: int,
    seed: int,
    shifts: tuple[str, ...],
    fmt: str,
    out: Path | None,
) -> None:
    """Verify the coverage guarantee on synthetic exchangeable data.

    Exits with status 4 and the measured coverage if any band or shift
    direction is violated.
    """
    results = []
    for alpha in alphas:
        results.append(exchangeability_check(alpha, n_trials=trials, master_seed=seed))
    for shift in shifts:
        for alpha in alphas:
            results.append(
                shift_direction_check(GeneratorKind(shift), alpha=alpha, n_trials=trials, master_seed=seed)
            )
    csv_rows, json_rows = synth_check_rows(results)
    manifest = build_manifest(
        "synth-check",
        "synth-check-v1",
        {
            "alpha": list(alphas),
            "trials": trials,
            "seed": seed,
            "shift": list(shifts),
            "format": fmt,
            "out": str(out) if out else None,
        },
        master_seed=seed,
        input_paths=[],
    )
    emit(
        schema="synth-check-v1",
        header=SYNTH_CHECK_HEADER,
        csv_rows=csv_rows,
        json_rows=json_rows,
        fmt=fmt,
        out=out,
        manifest=manifest,
    )
    failed = [r for r in results if not r.passed]
    if failed:
        details = "; ".join(
            f"{row['check']} alpha={row['alpha']}: mean coverage {row['mean_coverage']:.4f}"
            for row in (dict(j) for j in json_rows)
            if not row["passed"]
        )
        raise CheckFailure(f"{len(failed)} check(s) failed: {details}")


if __name__ == "__main__":
    main()
