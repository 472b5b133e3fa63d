"""Parse, validate, and aggregate per-prompt logit records into per-question probabilities.

The on-disk format is UTF-8 JSON Lines, one object per line:

    {"question_id": "q1", "subject": "anatomy", "prompt_id": 0,
     "logits": [1.2, -0.3, 0.0, 0.7], "answer": 2}

Option order is A, B, C, D <-> indices 0..3. Each question may appear under
several ``prompt_id`` values; its final probability vector is the arithmetic
mean of the per-prompt softmax outputs.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import DataError, DataWarning

OPTION_COUNT = 4
SIMPLEX_ATOL = 1e-9

Source = Union[str, Path, IO[bytes], IO[str]]


def _is_int(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


@dataclass(frozen=True)
class LogitRecord:
    """One (question, prompt) observation: raw option logits plus the true answer."""

    question_id: str
    subject: str
    prompt_id: int
    logits: tuple[float, float, float, float]
    answer: int

    def __post_init__(self) -> None:
        if not isinstance(self.question_id, str) or not self.question_id:
            raise DataError("question_id must be a non-empty string")
        if not isinstance(self.subject, str):
            raise DataError("subject must be a string")
        if not _is_int(self.prompt_id) or self.prompt_id < 0:
            raise DataError(f"prompt_id must be an integer >= 0, got {self.prompt_id!r}")
        if len(self.logits) != OPTION_COUNT:
            raise DataError(f"logits must have exactly {OPTION_COUNT} entries, got {len(self.logits)}")
        for value in self.logits:
            if not math.isfinite(value):
                raise DataError(
                    f"logits must be finite, got {list(self.logits)} "
                    f"(question_id={self.question_id!r}, prompt_id={self.prompt_id})"
                )
        if not _is_int(self.answer) or not 0 <= self.answer < OPTION_COUNT:
            raise DataError(f"answer must be an integer in [0, {OPTION_COUNT - 1}], got {self.answer!r}")


@dataclass(frozen=True)
class QuestionScores:
    """Per-question aggregated probability vector over the four options."""

    question_id: str
    subject: str
    probs: tuple[float, float, float, float]
    answer: int

    def __post_init__(self) -> None:
        if len(self.probs) != OPTION_COUNT:
            raise DataError(f"probs must have exactly {OPTION_COUNT} entries")
        if any(p < 0.0 or p > 1.0 for p in self.probs):
            raise DataError(f"probs entries must lie in [0, 1], got {list(self.probs)}")
        if abs(sum(self.probs) - 1.0) > SIMPLEX_ATOL:
            raise DataError(f"probs must sum to 1 within {SIMPLEX_ATOL}, got sum {sum(self.probs)!r}")
        if not _is_int(self.answer) or not 0 <= self.answer < OPTION_COUNT:
            raise DataError(f"answer must be an integer in [0, {OPTION_COUNT - 1}], got {self.answer!r}")


class Dataset:
    """Ordered collection of :class:`QuestionScores`, indexed by subject.

    Items are kept sorted by (subject, question_id), so two datasets built
    from the same records are identical regardless of input order.
    """

    def __init__(self, items: Iterable[QuestionScores]):
        ordered = sorted(items, key=lambda it: (it.subject, it.question_id))
        seen: set[str] = set()
        for item in ordered:
            if item.question_id in seen:
                raise DataError(f"duplicate question_id {item.question_id!r} in dataset")
            seen.add(item.question_id)
        self._items: tuple[QuestionScores, ...] = tuple(ordered)
        index: dict[str, list[int]] = {}
        for pos, item in enumerate(self._items):
            index.setdefault(item.subject, []).append(pos)
        self._subject_index: dict[str, tuple[int, ...]] = {s: tuple(p) for s, p in index.items()}
        self._probs_matrix: np.ndarray | None = None
        self._answers: np.ndarray | None = None

    @property
    def items(self) -> tuple[QuestionScores, ...]:
        return self._items

    @property
    def subject_index(self) -> Mapping[str, tuple[int, ...]]:
        return self._subject_index

    @property
    def subjects(self) -> tuple[str, ...]:
        return tuple(self._subject_index)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[QuestionScores]:
        return iter(self._items)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self._items == other._items

    def __repr__(self) -> str:
        return f"Dataset({len(self)} questions, {len(self.subjects)} subjects)"

    def probs_matrix(self) -> np.ndarray:
        """(n, 4) float array of probability vectors, in item order."""
        if self._probs_matrix is None:
            mat = np.array([it.probs for it in self._items], dtype=np.float64).reshape(-1, OPTION_COUNT)
            mat.setflags(write=False)
            self._probs_matrix = mat
        return self._probs_matrix

    def answers(self) -> np.ndarray:
        """(n,) int array of true-answer indices, in item order."""
        if self._answers is None:
            self._answers = np.array([it.answer for it in self._items], dtype=np.int64)
            self._answers.setflags(write=False)
        return self._answers

    def subset(self, subject: str) -> "Dataset":
        """Items of one subject, as a new dataset."""
        if subject not in self._subject_index:
            raise DataError(f"unknown subject {subject!r}; dataset has {sorted(self.subjects)}")
        return Dataset(self._items[p] for p in self._subject_index[subject])

    def split_by_subject(self) -> dict[str, "Dataset"]:
        return {subject: self.subset(subject) for subject in self.subjects}


def softmax(logits: Sequence[float] | np.ndarray) -> np.ndarray:
    """Normalize four option logits to a probability vector.

    Stable under large magnitudes: the maximum logit is subtracted before
    exponentiation, so the result is invariant to adding a constant to all
    entries and never overflows. Entries can underflow to 0.0 when logit
    gaps exceed ~745.
    """
    arr = np.asarray(logits, dtype=np.float64)
    if arr.shape != (OPTION_COUNT,):
        raise DataError(f"logits must be a vector of {OPTION_COUNT} numbers, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"logits must be finite, got {arr.tolist()}")
    shifted = arr - arr.max()
    exps = np.exp(shifted)
    return exps / exps.sum()


def aggregate_prompts(per_prompt_probs: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """Componentwise mean of per-prompt probability vectors.

    The mean of simplex vectors is itself on the simplex, so no
    renormalization is applied.
    """
    mat = np.asarray(per_prompt_probs, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != OPTION_COUNT or mat.shape[0] == 0:
        raise DataError(f"expected a non-empty sequence of {OPTION_COUNT}-vectors, got shape {mat.shape}")
    sums = mat.sum(axis=1)
    if np.any(mat < -SIMPLEX_ATOL) or np.any(np.abs(sums - 1.0) > SIMPLEX_ATOL):
        raise DataError("per-prompt probability vectors must lie on the simplex")
    return mat.mean(axis=0)


_REQUIRED_FIELDS = ("question_id", "subject", "prompt_id", "logits", "answer")


def _parse_line(line_no: int, text: str) -> LogitRecord:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise DataError(f"line {line_no}: expected a JSON object, got {type(obj).__name__}")
    missing = [f for f in _REQUIRED_FIELDS if f not in obj]
    if missing:
        raise DataError(f"line {line_no}: missing field(s) {', '.join(missing)}")
    logits = obj["logits"]
    if not isinstance(logits, list) or len(logits) != OPTION_COUNT:
        raise DataError(f"line {line_no}: logits must be an array of {OPTION_COUNT} numbers")
    values = []
    for v in logits:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise DataError(f"line {line_no}: logits must be an array of {OPTION_COUNT} numbers")
        values.append(float(v))
    try:
        return LogitRecord(
            question_id=obj["question_id"],
            subject=obj["subject"],
            prompt_id=obj["prompt_id"],
            logits=tuple(values),
            answer=obj["answer"],
        )
    except DataError as exc:
        raise DataError(f"line {line_no}: {exc}") from exc


def _iter_lines(source: Source) -> Iterator[tuple[int, str]]:
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            yield from _iter_lines(fh)
        return
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise DataError(f"line {line_no}: invalid UTF-8 ({exc.reason})") from exc
        else:
            text = raw
        if text.strip():
            yield line_no, text


def load_records(source: Source) -> Dataset:
    """Read a JSON-Lines logit file and aggregate it into a :class:`Dataset`.

    Records are grouped by ``question_id``; each group's logits are softmaxed
    and averaged over prompts. Raises :class:`DataError` naming the offending
    line for malformed rows, duplicate (question_id, prompt_id) pairs, or
    subject/answer conflicts within a question. Deterministic: identical
    bytes yield an identical dataset.
    """
    groups: dict[str, list[LogitRecord]] = {}
    seen_pairs: dict[tuple[str, int], int] = {}
    for line_no, text in _iter_lines(source):
        record = _parse_line(line_no, text)
        key = (record.question_id, record.prompt_id)
        if key in seen_pairs:
            raise DataError(
                f"line {line_no}: duplicate (question_id, prompt_id) "
                f"({record.question_id!r}, {record.prompt_id}); first seen on line {seen_pairs[key]}"
            )
        seen_pairs[key] = line_no
        group = groups.setdefault(record.question_id, [])
        if group:
            first = group[0]
            if record.subject != first.subject:
                raise DataError(
                    f"line {line_no}: conflicting subject for question {record.question_id!r} "
                    f"({record.subject!r} vs {first.subject!r})"
                )
            if record.answer != first.answer:
                raise DataError(
                    f"line {line_no}: conflicting answer for question {record.question_id!r} "
                    f"({record.answer} vs {first.answer})"
                )
        group.append(record)

    items = []
    for question_id, group in groups.items():
        group = sorted(group, key=lambda r: r.prompt_id)
        probs = aggregate_prompts([softmax(r.logits) for r in group])
        items.append(
            QuestionScores(
                question_id=question_id,
                subject=group[0].subject,
                probs=tuple(float(p) for p in probs),
                answer=group[0].answer,
            )
        )

    counts = {len(group) for group in groups.values()}
    if len(counts) > 1:
        warnings.warn(
            f"questions have differing prompt counts (min {min(counts)}, max {max(counts)}); "
            "each question is averaged over the prompts present",
            DataWarning,
            stacklevel=2,
        )
    return Dataset(items)


def write_jsonl(dataset: Dataset, target: Union[str, Path, IO[str]]) -> None:
    """Write a dataset in the logit-file format, one prompt per question.

    Logits are the natural logs of the aggregated probabilities (softmax
    inverts this up to float rounding). Zero probabilities cannot be
    expressed as finite logits and raise :class:`DataError`.
    """
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as fh:
            write_jsonl(dataset, fh)
        return
    for item in dataset:
        if any(p <= 0.0 for p in item.probs):
            raise DataError(
                f"question {item.question_id!r} has a zero probability; cannot express as finite logits"
            )
        record = {
            "question_id": item.question_id,
            "subject": item.subject,
            "prompt_id": 0,
            "logits": [math.log(p) for p in item.probs],
            "answer": item.answer,
        }
        target.write(json.dumps(record) + "\n")
