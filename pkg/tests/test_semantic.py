"""Embedding normalization and cosine text loss."""

import numpy as np
import pytest

from foveate import semantic
from foveate.errors import LengthMismatch, ZeroVector


class TestNormalizeEmbedding:
    def test_three_four_five(self):
        np.testing.assert_allclose(semantic.normalize_embedding([3.0, 4.0]), [0.6, 0.8])

    def test_unit_vector_unchanged(self):
        v = semantic.normalize_embedding([0.0, 1.0, 0.0])
        np.testing.assert_array_equal(v, [0.0, 1.0, 0.0])

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVector):
            semantic.normalize_embedding([0.0, 0.0])

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = rng.normal(size=8)
            if np.linalg.norm(v) < 1e-6:
                continue
            k = rng.uniform(0.1, 100.0)
            a = semantic.normalize_embedding(v)
            b = semantic.normalize_embedding(k * v)
            np.testing.assert_allclose(a, b, atol=1e-12)


class TestTextLoss:
    def test_identical(self):
        e = semantic.normalize_embedding([1.0, 2.0, 2.0])
        assert abs(semantic.text_loss(e, e)) < 1e-12

    def test_orthogonal(self):
        assert semantic.text_loss(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0

    def test_opposite(self):
        assert semantic.text_loss(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == 2.0

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = semantic.normalize_embedding(rng.normal(size=6))
            b = semantic.normalize_embedding(rng.normal(size=6))
            assert semantic.text_loss(a, b) == semantic.text_loss(b, a)

    def test_range(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            a = semantic.normalize_embedding(rng.normal(size=4))
            b = semantic.normalize_embedding(rng.normal(size=4))
            loss = semantic.text_loss(a, b)
            assert -1e-12 <= loss <= 2.0 + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            semantic.text_loss(np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0]))

    def test_scaling_invariance_through_normalize(self):
        rng = np.random.default_rng(3)
        w = semantic.normalize_embedding(rng.normal(size=5))
        v = rng.normal(size=5)
        l1 = semantic.text_loss(semantic.normalize_embedding(v), w)
        l2 = semantic.text_loss(semantic.normalize_embedding(3.7 * v), w)
        assert abs(l1 - l2) < 1e-9


class TestAnswerMatching:
    def test_normalized_equality(self):
        assert semantic.answer_matches("  Yes!", "yes")
        assert not semantic.answer_matches("no", "yes")

    def test_multiple_choice_requires_exact(self):
        close = semantic.normalize_embedding([1.0, 0.01])
        gt = semantic.normalize_embedding([1.0, 0.0])
        assert not semantic.answer_matches("b", "a", close, gt, choices=["a", "b"])

    def test_free_form_uses_similarity(self):
        close = semantic.normalize_embedding([1.0, 0.01])
        gt = semantic.normalize_embedding([1.0, 0.0])
        assert semantic.answer_matches("a cat", "the cat", close, gt)

    def test_dissimilar_embeddings_fail(self):
        a = np.array([1.0, 0.0])
        b = np.array([0.0, 1.0])
        assert not semantic.answer_matches("cat", "dog", a, b)
