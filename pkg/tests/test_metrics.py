import math

import numpy as np
import pytest

from cycleval.domain import EmbeddingVector
from cycleval.errors import DegenerateVectorError, DimensionMismatchError
from cycleval.metrics import (
    BleuParams,
    aggregate,
    bleu,
    brevity_penalty,
    cosine_similarity,
    effective_reference_length,
    modified_ngram_precision,
    text_to_text_similarity,
    tokenize,
)

# 32 / (sqrt(14) * sqrt(77)), computed independently before the build.
COS_123_456 = 0.9746318461970762


def vec(*values) -> EmbeddingVector:
    return EmbeddingVector.from_values(values)


class TestCosineSimilarity:
    def test_identical_vectors(self):
        v = vec(0.3, -1.2, 4.5)
        assert cosine_similarity(v, v) == 1.0

    def test_orthogonal_vectors(self):
        assert cosine_similarity(vec(1.0, 0.0), vec(0.0, 1.0)) == 0.0

    def test_opposite_vectors(self):
        v = vec(0.5, 2.0, -1.0)
        neg = vec(-0.5, -2.0, 1.0)
        assert cosine_similarity(v, neg) == -1.0

    def test_known_value(self):
        got = cosine_similarity(vec(1.0, 2.0, 3.0), vec(4.0, 5.0, 6.0))
        assert got == pytest.approx(COS_123_456, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            cosine_similarity(vec(1.0, 2.0), vec(1.0, 2.0, 3.0))

    def test_zero_norm_rejected(self):
        with pytest.raises(DegenerateVectorError):
            cosine_similarity(vec(0.0, 0.0), vec(1.0, 0.0))

    def test_brute_force_agreement(self):
        # Independent oracle: plain Python dot product and norms.
        rng = np.random.default_rng(7)
        for _ in range(50):
            dim = int(rng.integers(2, 128))
            a = rng.standard_normal(dim)
            b = rng.standard_normal(dim)
            dot = math.fsum(x * y for x, y in zip(a, b))
            norm_a = math.sqrt(math.fsum(x * x for x in a))
            norm_b = math.sqrt(math.fsum(y * y for y in b))
            expected = dot / (norm_a * norm_b)
            got = cosine_similarity(EmbeddingVector.from_values(a), EmbeddingVector.from_values(b))
            assert got == pytest.approx(expected, abs=1e-12)


class TestTokenize:
    def test_basic_sentence(self):
        assert tokenize("The cat sat.") == ["the", "cat", "sat"]

    def test_empty_text(self):
        assert tokenize("") == []

    def test_commas_stripped(self):
        assert tokenize("A man, riding a horse") == ["a", "man", "riding", "a", "horse"]

    def test_inner_punctuation_kept(self):
        assert tokenize("don't stop!") == ["don't", "stop"]

    def test_punctuation_only_tokens_dropped(self):
        assert tokenize("well -- yes") == ["well", "yes"]


class TestModifiedNgramPrecision:
    def test_clipping(self):
        got = modified_ngram_precision(["the", "the", "the"], [["the", "cat"]], 1)
        assert got == (1, 3)

    def test_perfect_overlap(self):
        cand = ["a", "b", "c", "d"]
        for n in range(1, 5):
            num, den = modified_ngram_precision(cand, [cand], n)
            assert num == den == len(cand) - n + 1

    def test_disjoint_vocabulary(self):
        got = modified_ngram_precision(["x", "y"], [["a", "b"]], 1)
        assert got == (0, 2)

    def test_candidate_shorter_than_n(self):
        assert modified_ngram_precision(["a", "b"], [["a", "b", "c"]], 3) == (0, 0)

    def test_clip_uses_single_best_reference(self):
        # "the" appears twice in one reference; the clip is per-reference max,
        # not the sum across references.
        got = modified_ngram_precision(
            ["the", "the", "the"], [["the", "the"], ["the", "cat"]], 1
        )
        assert got == (2, 3)


class TestBrevityPenalty:
    def test_longer_candidate(self):
        assert brevity_penalty(7, 5) == 1.0

    def test_half_length_candidate(self):
        assert brevity_penalty(3, 6) == pytest.approx(math.exp(-1.0), abs=1e-15)

    def test_equal_lengths(self):
        assert brevity_penalty(4, 4) == 1.0

    def test_zero_candidate_sentinel(self):
        assert brevity_penalty(0, 5) == 0.0


class TestBleu:
    def test_identical_candidate_scores_one(self):
        refs = ["A man rides a horse on the beach.", "Someone rides a horse."]
        assert bleu(refs[0], refs) == 1.0

    def test_short_perfect_prefix(self):
        got = bleu("the cat sat", ["the cat sat on the mat"], BleuParams(max_order=1))
        assert got == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_disjoint_vocabulary_scores_zero(self):
        assert bleu("xyzzy plugh", ["a man on a horse"]) == 0.0

    def test_zero_length_candidate(self):
        assert bleu("...", ["a man"]) == 0.0

    def test_short_candidate_renormalizes_orders(self):
        # 2-token candidate has no 3- or 4-grams; orders 1-2 carry the score.
        got = bleu("the cat", ["the cat sat"])
        p1, p2 = 2 / 2, 1 / 1
        expected = math.exp(1 - 3 / 2) * math.exp(0.5 * math.log(p1) + 0.5 * math.log(p2))
        assert got == pytest.approx(expected, abs=1e-12)

    def test_empty_references_rejected(self):
        with pytest.raises(ValueError):
            bleu("anything", [])

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            BleuParams(max_order=2, weights=(0.9, 0.2))
        with pytest.raises(ValueError):
            BleuParams(max_order=2, weights=(1.0,))


class TestEffectiveReferenceLength:
    def test_closest_wins(self):
        assert effective_reference_length(6, [3, 7, 20]) == 7

    def test_tie_goes_to_shorter(self):
        assert effective_reference_length(6, [5, 7]) == 5


class TestTextToTextSimilarity:
    def test_identical_texts_score_one(self):
        table = {"same": EmbeddingVector.from_values([0.6, 0.8])}
        per_ref, mean = text_to_text_similarity("same", ["same"] * 5, table.__getitem__)
        assert per_ref == [1.0] * 5
        assert mean == 1.0

    def test_five_references_average(self):
        vectors = {
            "cand": EmbeddingVector.from_values([1.0, 0.0]),
            "r0": EmbeddingVector.from_values([1.0, 0.0]),
            "r1": EmbeddingVector.from_values([0.0, 1.0]),
            "r2": EmbeddingVector.from_values([-1.0, 0.0]),
            "r3": EmbeddingVector.from_values([1.0, 1.0]),
            "r4": EmbeddingVector.from_values([2.0, 0.0]),
        }
        per_ref, mean = text_to_text_similarity(
            "cand", ["r0", "r1", "r2", "r3", "r4"], vectors.__getitem__
        )
        assert len(per_ref) == 5
        expected = [1.0, 0.0, -1.0, 1 / math.sqrt(2), 1.0]
        assert per_ref == pytest.approx(expected, abs=1e-12)
        assert mean == pytest.approx(math.fsum(expected) / 5, abs=1e-12)

    def test_empty_references_rejected(self):
        with pytest.raises(ValueError):
            text_to_text_similarity("x", [], lambda t: EmbeddingVector.from_values([1.0]))


class TestAggregate:
    def test_two_values(self):
        summary = aggregate([0.5, 0.7])
        assert summary.mean == pytest.approx(0.6, abs=1e-15)
        assert summary.n == 2
        assert summary.min == 0.5
        assert summary.max == 0.7

    def test_empty(self):
        summary = aggregate([])
        assert summary.n == 0
        assert summary.mean is None
        assert summary.std is None

    def test_thousand_seeded_uniforms_vs_numpy(self):
        rng = np.random.default_rng(123)
        values = rng.uniform(size=1000).tolist()
        summary = aggregate(values)
        assert summary.mean == pytest.approx(float(np.mean(values)), abs=1e-12)
        assert summary.std == pytest.approx(float(np.std(values)), abs=1e-12)
