"""Bundled logit files in the JSON-Lines input format.

* ``threshold_demo.jsonl`` — four single-prompt questions whose true-label
  scores are 0.1, 0.2, 0.3, 0.4; handy for seeing the quantile rule.
* ``demo_small.jsonl`` — two subjects with multi-prompt questions,
  small enough to read.
* ``synthetic_mixed.jsonl`` — three subjects x 120 questions x 3 prompts
  of seeded synthetic logits (see scripts/make_fixtures.py).
"""

from __future__ import annotations

from pathlib import Path

_ROOT = Path(__file__).resolve().parent


def available() -> list[str]:
    return sorted(p.name for p in _ROOT.glob("*.jsonl"))


def fixture_path(name: str) -> Path:
    path = _ROOT / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture {name!r}; available: {', '.join(available())}")
    return path
