"""Smoke tests for the Python bindings, checked against numpy oracles."""

import math
import os
import tempfile

import numpy as np
import pytest

import kfvqa


def test_normalize_answer():
    assert kfvqa.normalize_answer("The Autumn.") == "autumn"
    assert kfvqa.normalize_answer("  taxi   cab ") == "taxi cab"
    assert kfvqa.normalize_answer("two") == "2"
    assert kfvqa.normalize_answer("dont") == "don't"


def test_vqa_accuracy_matches_leave_one_out():
    for k in range(11):
        annotations = ["gold"] * k + [f"other{i}" for i in range(10 - k)]
        got = kfvqa.vqa_accuracy("gold", annotations)
        oracle = sum(
            min(1.0, (k - 1 if i < k else k) / 3.0) for i in range(10)
        ) / 10.0
        assert got == pytest.approx(oracle, abs=1e-15)
    assert kfvqa.vqa_accuracy("gold", ["gold"] * 3 + ["x"] * 7) == 0.9
    assert kfvqa.vqa_match_count("The Autumn.", ["autumn", "fall"]) == 1


def test_confidence_score():
    f, s = kfvqa.confidence_score([0.0])
    assert (f, s) == (0.0, 1.0)
    f, s = kfvqa.confidence_score([-0.1, -0.2, -0.3])
    assert s == pytest.approx(math.exp(-0.6), abs=1e-12)
    with pytest.raises(kfvqa.KfvqaError):
        kfvqa.confidence_score([])


def test_gate():
    assert kfvqa.decide_gate(0.80, 0.8)
    assert not kfvqa.decide_gate(0.81, 0.8)


def test_low_noise_query():
    assert (
        kfvqa.build_low_noise_query("What season is it?", ["falling leaves", "autumn"])
        == "What season is it? falling leaves autumn"
    )
    assert kfvqa.build_low_noise_query("q?", []) == "q?"


def test_select_h():
    segments = [f"seg{i}" for i in range(10)]
    assert kfvqa.select_h(segments, 7) == segments[:7]
    drawn = kfvqa.select_h(segments, 4, "seeded_uniform", 42)
    assert drawn == kfvqa.select_h(segments, 4, "seeded_uniform", 42)
    assert len(set(drawn)) == 4
    assert set(drawn) <= set(segments)


def test_index_against_numpy_oracle():
    rng = np.random.default_rng(7)
    vectors = rng.standard_normal((50, 8)).astype(np.float32)
    ids = [f"doc{i}" for i in range(50)]
    index = kfvqa.Index.from_vectors(ids, vectors.tolist())
    assert index.dim == 8
    assert len(index) == 50

    query = rng.standard_normal(8).astype(np.float32)
    got = index.search(query.tolist(), 5)
    scores = vectors.astype(np.float64) @ query.astype(np.float64)
    order = sorted(range(50), key=lambda i: (-scores[i], ids[i]))[:5]
    assert [doc_id for doc_id, _ in got] == [ids[i] for i in order]
    for (_, score), i in zip(got, order):
        assert score == pytest.approx(scores[i], abs=1e-9)


def test_index_round_trip(tmp_path):
    vectors = [[1.0, 0.0], [0.0, 1.0]]
    index = kfvqa.Index.from_vectors(["a", "b"], vectors)
    path = os.path.join(tmp_path, "index.bin")
    index.save(path)
    loaded = kfvqa.Index.load(path)
    assert loaded.search([0.0, 1.0], 1) == [("b", 1.0)]
