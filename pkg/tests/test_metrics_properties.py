"""Property tests for the metric invariants."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cycleval.domain import EmbeddingVector
from cycleval.metrics import (
    BleuParams,
    bleu,
    brevity_penalty,
    cosine_similarity,
    modified_ngram_precision,
    tokenize,
)

# Components are either zero or of sane magnitude, so scaled norms never
# underflow to an artificial zero vector.
finite_components = st.one_of(
    st.just(0.0),
    st.floats(min_value=1e-3, max_value=1e6),
    st.floats(min_value=-1e6, max_value=-1e-3),
)


@st.composite
def nonzero_vector_pairs(draw):
    dim = draw(st.integers(min_value=1, max_value=32))
    a = draw(st.lists(finite_components, min_size=dim, max_size=dim))
    b = draw(st.lists(finite_components, min_size=dim, max_size=dim))
    if not any(a):
        a[0] = 1.0
    if not any(b):
        b[0] = -1.0
    return EmbeddingVector.from_values(a), EmbeddingVector.from_values(b)


@given(nonzero_vector_pairs())
def test_cosine_symmetry(pair):
    a, b = pair
    assert abs(cosine_similarity(a, b) - cosine_similarity(b, a)) <= 1e-12


@given(nonzero_vector_pairs(), st.sampled_from([1e-6, 1.0, 1e6]))
def test_cosine_positive_scale_invariance(pair, alpha):
    a, b = pair
    scaled = EmbeddingVector.from_values(alpha * a.values)
    assert abs(cosine_similarity(scaled, b) - cosine_similarity(a, b)) <= 1e-9


@given(nonzero_vector_pairs())
def test_cosine_range(pair):
    a, b = pair
    assert -1.0 <= cosine_similarity(a, b) <= 1.0


tiny_tokens = st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), min_size=0, max_size=6)


@given(
    tiny_tokens.filter(bool),
    st.lists(tiny_tokens.filter(bool), min_size=1, max_size=3),
    st.integers(min_value=1, max_value=4),
)
def test_precision_numerator_never_exceeds_denominator(candidate, references, n):
    num, den = modified_ngram_precision(candidate, references, n)
    assert 0 <= num <= den


@given(st.integers(min_value=0, max_value=50), st.integers(min_value=0, max_value=50))
def test_brevity_penalty_range(c, r):
    bp = brevity_penalty(c, r)
    if c == 0:
        assert bp == 0.0
    else:
        assert 0.0 < bp <= 1.0


@given(
    tiny_tokens.filter(bool),
    st.lists(tiny_tokens.filter(bool), min_size=1, max_size=3),
)
def test_bleu_range_and_identity(candidate, references):
    score = bleu(" ".join(candidate), [" ".join(r) for r in references])
    assert 0.0 <= score <= 1.0
    for ref in references:
        assert bleu(" ".join(ref), [" ".join(r) for r in references]) == 1.0


@given(st.text(max_size=80))
def test_tokenize_is_deterministic_and_lowercase(text):
    first = tokenize(text)
    assert first == tokenize(text)
    assert all(tok == tok.lower() for tok in first)
    assert all(tok for tok in first)


# --- exhaustive oracle for BLEU on tiny corpora -----------------------------


def oracle_ngram_precision(candidate, references, n):
    """Enumerate n-gram positions naively and clip against each reference."""
    cand_ngrams = [tuple(candidate[i : i + n]) for i in range(len(candidate) - n + 1)]
    if not cand_ngrams:
        return (0, 0)
    numerator = 0
    for ngram in set(cand_ngrams):
        cand_count = cand_ngrams.count(ngram)
        best = 0
        for ref in references:
            ref_ngrams = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
            best = max(best, ref_ngrams.count(ngram))
        numerator += min(cand_count, best)
    return (numerator, len(cand_ngrams))


def oracle_bleu(candidate_tokens, reference_token_lists, max_order=4):
    c = len(candidate_tokens)
    if c == 0:
        return 0.0
    r = min((len(ref) for ref in reference_token_lists), key=lambda L: (abs(L - c), L))
    pairs = []
    for n in range(1, max_order + 1):
        num, den = oracle_ngram_precision(candidate_tokens, reference_token_lists, n)
        if den == 0:
            continue
        pairs.append((num, den))
    if not pairs or any(num == 0 for num, _ in pairs):
        return 0.0
    weight = 1.0 / len(pairs)
    log_sum = sum(weight * math.log(num / den) for num, den in pairs)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(log_sum)


def test_bleu_matches_exhaustive_oracle_on_random_corpora():
    rng = np.random.default_rng(2024)
    vocab = ["a", "b", "c", "d", "e"]
    for _ in range(200):
        cand = [vocab[i] for i in rng.integers(0, 5, size=rng.integers(1, 7))]
        refs = [
            [vocab[i] for i in rng.integers(0, 5, size=rng.integers(1, 7))]
            for _ in range(int(rng.integers(1, 4)))
        ]
        for n in range(1, 5):
            assert modified_ngram_precision(cand, refs, n) == oracle_ngram_precision(
                cand, refs, n
            )
        got = bleu(" ".join(cand), [" ".join(r) for r in refs])
        assert got == pytest.approx(oracle_bleu(cand, refs), abs=1e-12)
