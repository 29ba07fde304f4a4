"""Native metric implementations: cosine similarity, BLEU, and aggregates.

All arithmetic is 64-bit floating point; n-gram precisions are kept as exact
integer pairs until the final score.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .domain import EmbeddingVector
from .errors import DegenerateVectorError, DimensionMismatchError

TokenSequence = list[str]


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of the angle between two embedding vectors.

    Returns (a . b) / (||a|| ||b||), clamped to [-1, 1] to absorb floating
    point excursions at the boundary.

    Raises:
        DimensionMismatchError: if the vectors differ in dimension.
        DegenerateVectorError: if either vector has zero norm (the quotient
            is undefined there).
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dim {a.dim} != {b.dim}")
    norm_a = float(np.linalg.norm(a.values))
    norm_b = float(np.linalg.norm(b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateVectorError("cosine similarity undefined for zero-norm vector")
    value = float(np.dot(a.values, b.values)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


def tokenize(text: str) -> TokenSequence:
    """Lowercase, split on whitespace, strip leading/trailing punctuation.

    Empty tokens are dropped; an empty input yields an empty sequence. The
    policy is deliberately simple and fixed so that scores are reproducible.
    """
    tokens = []
    for raw in text.lower().split():
        token = _strip_punctuation(raw)
        if token:
            tokens.append(token)
    return tokens


def _strip_punctuation(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def modified_ngram_precision(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    n: int,
) -> tuple[int, int]:
    """Clipped n-gram precision as an exact (numerator, denominator) pair.

    Each distinct candidate n-gram contributes min(its candidate count, its
    max count in any single reference). A candidate shorter than n yields
    (0, 0), signalling "undefined at this order" to the caller.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cand_counts = _ngram_counts(candidate, n)
    denominator = sum(cand_counts.values())
    if denominator == 0:
        return (0, 0)
    max_ref_counts: Counter = Counter()
    for ref in references:
        for ngram, count in _ngram_counts(ref, n).items():
            if count > max_ref_counts[ngram]:
                max_ref_counts[ngram] = count
    numerator = sum(min(count, max_ref_counts[ng]) for ng, count in cand_counts.items())
    return (numerator, denominator)


def brevity_penalty(c: int, r: int) -> float:
    """Multiplicative penalty for candidates shorter than the reference.

    1 when c > r, exp(1 - r/c) when 0 < c <= r. A zero-length candidate gets
    the 0 sentinel, which callers map to a zero score.
    """
    if c < 0 or r < 0:
        raise ValueError("lengths must be non-negative")
    if c == 0:
        return 0.0
    if c > r:
        return 1.0
    return math.exp(1.0 - r / c)


@dataclass(frozen=True)
class BleuParams:
    """Maximum n-gram order and the weights of each order."""

    max_order: int = 4
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.max_order < 1:
            raise ValueError("max_order must be >= 1")
        weights = self.weights
        if weights is None:
            weights = tuple(1.0 / self.max_order for _ in range(self.max_order))
        else:
            weights = tuple(float(w) for w in weights)
            if len(weights) != self.max_order:
                raise ValueError(f"need {self.max_order} weights, got {len(weights)}")
            if any(w <= 0 for w in weights):
                raise ValueError("weights must be positive")
            if abs(math.fsum(weights) - 1.0) > 1e-12:
                raise ValueError("weights must sum to 1")
        object.__setattr__(self, "weights", weights)


def effective_reference_length(c: int, reference_lengths: Sequence[int]) -> int:
    """Reference length closest to the candidate length, ties toward shorter."""
    if not reference_lengths:
        raise ValueError("reference_lengths must be non-empty")
    return min(reference_lengths, key=lambda r: (abs(r - c), r))


def bleu(candidate: str, references: Sequence[str], params: BleuParams | None = None) -> float:
    """Sentence-level BLEU with no smoothing.

    Orders whose denominator is zero (candidate shorter than n) are dropped
    and the remaining weights renormalized. Any surviving order with zero
    precision forces a 0 score.
    """
    if not references:
        raise ValueError("references must be non-empty")
    params = params or BleuParams()
    cand = tokenize(candidate)
    refs = [tokenize(r) for r in references]
    c = len(cand)
    if c == 0:
        return 0.0
    r = effective_reference_length(c, [len(ref) for ref in refs])

    included: list[tuple[float, int, int]] = []
    for n in range(1, params.max_order + 1):
        num, den = modified_ngram_precision(cand, refs, n)
        if den == 0:
            continue
        included.append((params.weights[n - 1], num, den))
    if not included:
        return 0.0
    if any(num == 0 for _, num, _ in included):
        return 0.0
    weight_total = math.fsum(w for w, _, _ in included)
    log_sum = math.fsum((w / weight_total) * math.log(num / den) for w, num, den in included)
    return brevity_penalty(c, r) * math.exp(log_sum)


def text_to_text_similarity(
    candidate: str,
    references: Sequence[str],
    embed: Callable[[str], EmbeddingVector],
) -> tuple[list[float], float]:
    """Cosine of the candidate's text embedding against each reference's.

    Returns the per-reference scores and their arithmetic mean.
    """
    if not references:
        raise ValueError("references must be non-empty")
    candidate_vec = embed(candidate)
    per_ref = [cosine_similarity(candidate_vec, embed(ref)) for ref in references]
    return per_ref, math.fsum(per_ref) / len(per_ref)


@dataclass(frozen=True)
class ScoreSummary:
    """Mean / population std / min / max over a list of scores."""

    n: int
    mean: float | None
    std: float | None
    min: float | None
    max: float | None


def aggregate(scores: Sequence[float]) -> ScoreSummary:
    """Exact arithmetic summary; empty input yields n=0 and null statistics."""
    n = len(scores)
    if n == 0:
        return ScoreSummary(n=0, mean=None, std=None, min=None, max=None)
    mean = math.fsum(scores) / n
    variance = math.fsum((s - mean) ** 2 for s in scores) / n
    return ScoreSummary(n=n, mean=mean, std=math.sqrt(variance), min=min(scores), max=max(scores))
