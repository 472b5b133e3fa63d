import io
import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from conformal_sets.errors import DataError, DataWarning
from conformal_sets.ingest import (
    Dataset,
    LogitRecord,
    QuestionScores,
    aggregate_prompts,
    load_records,
    softmax,
    write_jsonl,
)


def softmax_oracle(logits):
    """Extended-precision softmax, independent of the implementation."""
    with mpmath.workdps(200):
        exps = [mpmath.exp(x) for x in logits]
        total = mpmath.fsum(exps)
        return np.array([float(e / total) for e in exps])


def lines(*objs):
    return io.BytesIO(("\n".join(json.dumps(o) for o in objs) + "\n").encode())


def record(qid="q1", subject="s", prompt_id=0, logits=(0, 0, 0, 0), answer=0):
    return {
        "question_id": qid,
        "subject": subject,
        "prompt_id": prompt_id,
        "logits": list(logits),
        "answer": answer,
    }


class TestSoftmax:
    def test_uniform(self):
        assert softmax([0, 0, 0, 0]).tolist() == [0.25, 0.25, 0.25, 0.25]

    def test_ln2(self):
        assert_allclose(softmax([math.log(2), 0, 0, 0]), [0.4, 0.2, 0.2, 0.2], rtol=1e-12)

    @pytest.mark.parametrize("big", [1000.0, 710.0, 5000.0])
    def test_extreme_logits_match_extended_precision(self, big):
        logits = [big, 0.0, 0.0, 0.0]
        result = softmax(logits)
        expected = softmax_oracle(logits)
        assert np.all(np.isfinite(result))
        assert_allclose(result, expected, rtol=1e-6, atol=5e-324)
        assert result[0] == pytest.approx(1.0, abs=1e-12)

    def test_mixed_large_logits_against_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            logits = rng.uniform(-600, 600, size=4)
            assert_allclose(softmax(logits), softmax_oracle(logits), rtol=1e-12)

    @given(
        st.lists(st.floats(min_value=-100, max_value=100), min_size=4, max_size=4),
        st.floats(min_value=-1000, max_value=1000),
    )
    @settings(max_examples=200)
    def test_shift_invariance(self, logits, constant):
        # ranges keep x + c faithful to well under 1e-12, so the tolerance
        # measures the algorithm rather than input rounding
        base = softmax(logits)
        shifted = softmax([x + constant for x in logits])
        assert np.all(np.abs(base - shifted) <= 1e-12)

    def test_shift_invariance_huge_constants(self):
        logits = [0.3, -1.2, 0.0, 2.4]
        base = softmax(logits)
        for constant in (1e6, -1e6, 1e9):
            shifted = softmax([x + constant for x in logits])
            # dominated by the float rounding of x + c, not by softmax
            assert_allclose(shifted, base, atol=1e-9, rtol=0)
            assert abs(shifted.sum() - 1.0) <= 1e-9

    def test_output_on_simplex(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = softmax(rng.uniform(-50, 50, size=4))
            assert np.all(p >= 0)
            assert abs(p.sum() - 1.0) <= 1e-9

    @pytest.mark.parametrize("bad", [[np.nan, 0, 0, 0], [np.inf, 0, 0, 0], [0, -np.inf, 0, 0]])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(DataError, match="finite"):
            softmax(bad)

    def test_wrong_length_rejected(self):
        with pytest.raises(DataError):
            softmax([0.0, 1.0, 2.0])


class TestAggregatePrompts:
    def test_single_prompt_identity(self):
        assert_allclose(aggregate_prompts([[0.4, 0.2, 0.2, 0.2]]), [0.4, 0.2, 0.2, 0.2], rtol=0, atol=0)

    def test_mean_of_two_one_hots(self):
        assert aggregate_prompts([[1, 0, 0, 0], [0, 1, 0, 0]]).tolist() == [0.5, 0.5, 0, 0]

    def test_idempotent_on_identical_inputs(self):
        v = [0.31, 0.29, 0.25, 0.15]
        assert_allclose(aggregate_prompts([v] * 10), v, rtol=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            aggregate_prompts([])

    def test_non_simplex_rejected(self):
        with pytest.raises(DataError, match="simplex"):
            aggregate_prompts([[0.5, 0.5, 0.5, 0.5]])

    @given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=100)
    def test_mean_stays_on_simplex(self, n_prompts, seed):
        rng = np.random.default_rng(seed)
        vectors = rng.dirichlet(np.ones(4), size=n_prompts)
        out = aggregate_prompts(vectors)
        assert abs(out.sum() - 1.0) <= 1e-9
        assert np.all(out >= 0)


class TestLoadRecords:
    def test_two_flat_prompts(self):
        ds = load_records(lines(record(prompt_id=0), record(prompt_id=1)))
        assert len(ds) == 1
        assert ds.items[0].probs == (0.25, 0.25, 0.25, 0.25)

    def test_one_hot_composition(self):
        ds = load_records(
            lines(
                record(prompt_id=0, logits=[800, 0, 0, 0]),
                record(prompt_id=1, logits=[0, 800, 0, 0]),
            )
        )
        assert ds.items[0].probs == (0.5, 0.5, 0.0, 0.0)

    def test_answer_letter_names_line(self):
        with pytest.raises(DataError, match=r"line 1.*answer"):
            load_records(lines(record(answer="E")))

    def test_answer_out_of_range_names_line(self):
        with pytest.raises(DataError, match=r"line 2"):
            load_records(lines(record(qid="a"), record(qid="b", answer=4)))

    def test_malformed_json_names_line(self):
        stream = io.BytesIO(b'{"question_id": "q1"\nnot json\n')
        with pytest.raises(DataError, match="line 1"):
            load_records(stream)

    def test_duplicate_question_prompt_pair(self):
        with pytest.raises(DataError, match=r"line 2.*duplicate"):
            load_records(lines(record(), record()))

    def test_conflicting_subject(self):
        with pytest.raises(DataError, match="conflicting subject"):
            load_records(lines(record(prompt_id=0), record(prompt_id=1, subject="other")))

    def test_conflicting_answer(self):
        with pytest.raises(DataError, match="conflicting answer"):
            load_records(lines(record(prompt_id=0), record(prompt_id=1, answer=1)))

    def test_missing_field_names_line(self):
        obj = record()
        del obj["logits"]
        with pytest.raises(DataError, match=r"line 1.*logits"):
            load_records(lines(obj))

    def test_non_numeric_logits(self):
        with pytest.raises(DataError, match=r"line 1"):
            load_records(lines(record(logits=["a", 0, 0, 0])))

    def test_nan_literal_rejected(self):
        stream = io.BytesIO(
            b'{"question_id": "q1", "subject": "s", "prompt_id": 0, "logits": [NaN, 0, 0, 0], "answer": 0}\n'
        )
        with pytest.raises(DataError, match=r"line 1.*finite"):
            load_records(stream)

    def test_deterministic_and_sorted(self):
        payload = lines(
            record(qid="z", subject="beta", prompt_id=0, logits=[1, 0, 0, 0]),
            record(qid="a", subject="beta", prompt_id=0, logits=[0, 1, 0, 0], answer=1),
            record(qid="m", subject="alpha", prompt_id=0, logits=[0, 0, 1, 0], answer=2),
        ).getvalue()
        first = load_records(io.BytesIO(payload))
        second = load_records(io.BytesIO(payload))
        assert first == second
        assert [it.question_id for it in first] == ["m", "a", "z"]
        assert [it.subject for it in first] == ["alpha", "beta", "beta"]
        assert all(a.probs == b.probs for a, b in zip(first, second))

    def test_warns_on_uneven_prompt_counts(self):
        payload = lines(
            record(qid="a", prompt_id=0),
            record(qid="a", prompt_id=1),
            record(qid="b", prompt_id=0),
        )
        with pytest.warns(DataWarning, match="prompt counts"):
            load_records(payload)

    def test_blank_lines_skipped(self):
        payload = io.BytesIO(b"\n" + lines(record()).getvalue() + b"\n\n")
        assert len(load_records(payload)) == 1

    def test_empty_input_gives_empty_dataset(self):
        ds = load_records(io.BytesIO(b""))
        assert len(ds) == 0
        assert ds.probs_matrix().shape == (0, 4)

    def test_accepts_path(self, threshold_demo_path):
        ds = load_records(threshold_demo_path)
        assert len(ds) == 4
        assert ds.subjects == ("demo",)


class TestTypes:
    def test_logit_record_validation(self):
        with pytest.raises(DataError):
            LogitRecord("q", "s", -1, (0, 0, 0, 0), 0)
        with pytest.raises(DataError, match="finite"):
            LogitRecord("q", "s", 0, (math.inf, 0, 0, 0), 0)
        with pytest.raises(DataError):
            LogitRecord("q", "s", 0, (0, 0, 0, 0), True)

    def test_question_scores_validation(self):
        with pytest.raises(DataError, match="sum"):
            QuestionScores("q", "s", (0.3, 0.3, 0.3, 0.3), 0)
        with pytest.raises(DataError):
            QuestionScores("q", "s", (1.2, -0.2, 0.0, 0.0), 0)

    def test_dataset_rejects_duplicate_ids(self):
        item = QuestionScores("q", "s", (0.25, 0.25, 0.25, 0.25), 0)
        with pytest.raises(DataError, match="duplicate"):
            Dataset([item, item])

    def test_subject_index_partitions_positions(self, synthetic_mixed_path):
        ds = load_records(synthetic_mixed_path)
        positions = sorted(p for idx in ds.subject_index.values() for p in idx)
        assert positions == list(range(len(ds)))
        for subject, idx in ds.subject_index.items():
            assert all(ds.items[p].subject == subject for p in idx)

    def test_subset_unknown_subject(self, demo_small_path):
        ds = load_records(demo_small_path)
        with pytest.raises(DataError, match="unknown subject"):
            ds.subset("philosophy")


class TestWriteJsonl:
    def test_roundtrip(self, demo_small_path):
        original = load_records(demo_small_path)
        buf = io.StringIO()
        write_jsonl(original, buf)
        recovered = load_records(io.BytesIO(buf.getvalue().encode()))
        assert [it.question_id for it in recovered] == [it.question_id for it in original]
        assert [it.answer for it in recovered] == [it.answer for it in original]
        assert_allclose(
            recovered.probs_matrix(), original.probs_matrix(), rtol=1e-12, atol=1e-15
        )

    def test_zero_probability_rejected(self):
        ds = Dataset([QuestionScores("q", "s", (1.0, 0.0, 0.0, 0.0), 0)])
        buf = io.StringIO()
        with pytest.raises(DataError, match="zero probability"):
            write_jsonl(ds, buf)
