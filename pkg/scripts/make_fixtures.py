#!/usr/bin/env python3
"""Regenerate the bundled JSONL fixtures (deterministic; outputs are committed).

Run from the repo root:  PYTHONPATH=src python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from conformal_sets.synthetic import draw_labels, sample_probability_vectors

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "conformal_sets" / "fixtures"


def dump(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    print(f"wrote {path} ({len(records)} lines)")


def threshold_demo() -> list[dict]:
    """Four single-prompt questions with true-label scores 0.1, 0.2, 0.3, 0.4."""
    rows = [
        ("d1", [0.9, 0.04, 0.03, 0.03]),
        ("d2", [0.8, 0.10, 0.06, 0.04]),
        ("d3", [0.7, 0.15, 0.10, 0.05]),
        ("d4", [0.6, 0.20, 0.12, 0.08]),
    ]
    return [
        {
            "question_id": qid,
            "subject": "demo",
            "prompt_id": 0,
            "logits": [math.log(p) for p in probs],
            "answer": 0,
        }
        for qid, probs in rows
    ]


def subject_records(
    rng: np.random.Generator,
    subject: str,
    n_questions: int,
    n_prompts: int,
    concentration: float,
    prompt_noise: float,
    qid_prefix: str,
) -> list[dict]:
    """Per-prompt logits around a sampled per-question probability vector."""
    probs = sample_probability_vectors(rng, n_questions, concentration)
    answers = draw_labels(rng, probs)
    records = []
    for q in range(n_questions):
        base = np.log(probs[q])
        for prompt_id in range(n_prompts):
            logits = base + rng.normal(0.0, prompt_noise, size=4)
            records.append(
                {
                    "question_id": f"{qid_prefix}{q:04d}",
                    "subject": subject,
                    "prompt_id": prompt_id,
                    "logits": [round(float(v), 6) for v in logits],
                    "answer": int(answers[q]),
                }
            )
    return records


def demo_small() -> list[dict]:
    rng = np.random.default_rng(20240)
    records = []
    records += subject_records(rng, "marketing", 6, 2, 0.5, 0.4, "mk")
    records += subject_records(rng, "anatomy", 6, 2, 1.0, 0.4, "an")
    return records


def synthetic_mixed() -> list[dict]:
    rng = np.random.default_rng(77031)
    records = []
    records += subject_records(rng, "high school computer science", 120, 3, 1.6, 0.5, "cs")
    records += subject_records(rng, "anatomy", 120, 3, 1.0, 0.5, "an")
    records += subject_records(rng, "marketing", 120, 3, 0.6, 0.5, "mk")
    return records


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    dump(OUT_DIR / "threshold_demo.jsonl", threshold_demo())
    dump(OUT_DIR / "demo_small.jsonl", demo_small())
    dump(OUT_DIR / "synthetic_mixed.jsonl", synthetic_mixed())


if __name__ == "__main__":
    main()
