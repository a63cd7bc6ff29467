"""Sequence metrics: sentence/corpus BLEU, GLEU, suffix deltas, and the
linearized n-gram cost used to weight lattice edges.

All scores live in [0, 1]; reports multiply by 100. The linear cost is
a *cost* (lower is better): each emitted token pays the length weight
and each reference n-gram hit earns a negative reward.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class ThetaParams:
    """Linear n-gram cost weights.

    theta[0] = 1 per token; theta[n] = -1 / (4 p r_decay^(n-1)) per
    matched n-gram, n = 1..order. p is a nominal n-gram precision and
    r_decay its per-order decay; both are tuned by grid search.
    """

    p: float
    r_decay: float
    order: int = 2

    def __post_init__(self) -> None:
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must be in (0, 1), got {self.p}")
        if not 0.0 < self.r_decay < 1.0:
            raise ValueError(f"r_decay must be in (0, 1), got {self.r_decay}")
        if self.order < 1:
            raise ValueError("order must be >= 1")

    @property
    def theta(self) -> tuple[float, ...]:
        return (1.0,) + tuple(
            -1.0 / (4.0 * self.p * self.r_decay ** (n - 1))
            for n in range(1, self.order + 1)
        )


class NGramIndex:
    """Reference-side n-gram presence sets and clipped counts."""

    def __init__(self, ref: Sequence[int], max_order: int = 4):
        ref = tuple(ref)
        if not ref:
            raise ValueError("reference must be non-empty")
        self.ref = ref
        self.ref_len = len(ref)
        self.max_order = max_order
        self.counts: tuple[Counter, ...] = tuple(
            _ngram_counts(ref, n) for n in range(1, max_order + 1)
        )
        self.presence: tuple[frozenset[tuple[int, ...]], ...] = tuple(
            frozenset(c) for c in self.counts
        )

    def __contains__(self, ngram: tuple[int, ...]) -> bool:
        n = len(ngram)
        return 1 <= n <= self.max_order and ngram in self.presence[n - 1]

    @cached_property
    def unigram_array(self) -> np.ndarray:
        return np.fromiter(
            sorted(g[0] for g in self.presence[0]), dtype=np.int64, count=len(self.presence[0])
        )

    def bigram_key_array(self, stride: int) -> np.ndarray:
        if self.max_order < 2:
            return np.empty(0, dtype=np.int64)
        keys = sorted(a * stride + b for a, b in self.presence[1])
        return np.fromiter(keys, dtype=np.int64, count=len(keys))

    @cached_property
    def max_token(self) -> int:
        return max(self.ref)


def _ngram_counts(tokens: Sequence[int], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _clipped_matches(hyp: Sequence[int], ref_counts: Counter, n: int) -> tuple[int, int]:
    total = max(len(hyp) - n + 1, 0)
    if total == 0:
        return 0, 0
    matched = 0
    for gram, cnt in _ngram_counts(hyp, n).items():
        matched += min(cnt, ref_counts.get(gram, 0))
    return matched, total


def _ref_counts(ref: Sequence[int] | NGramIndex, max_n: int) -> tuple[tuple[Counter, ...], int]:
    if isinstance(ref, NGramIndex):
        if max_n > ref.max_order:
            raise ValueError(f"index holds orders up to {ref.max_order}, need {max_n}")
        return ref.counts, ref.ref_len
    ref = tuple(ref)
    if not ref:
        raise ValueError("reference must be non-empty")
    return tuple(_ngram_counts(ref, n) for n in range(1, max_n + 1)), len(ref)


def sentence_bleu(hyp: Sequence[int], ref: Sequence[int] | NGramIndex, max_n: int = 4) -> float:
    """Smoothed sentence BLEU in [0, 1].

    Geometric mean of clipped n-gram precisions with add-one smoothing
    on numerator and denominator for n >= 2 (unigram unsmoothed), times
    the brevity penalty exp(min(0, 1 - |ref|/|hyp|)). An empty
    hypothesis scores 0; an empty reference is an error.
    """
    counts, ref_len = _ref_counts(ref, max_n)
    hyp = tuple(hyp)
    if not hyp:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        matched, total = _clipped_matches(hyp, counts[n - 1], n)
        if n == 1:
            if matched == 0:
                return 0.0
            log_sum += math.log(matched / total)
        else:
            log_sum += math.log((matched + 1) / (total + 1))
    bp = math.exp(min(0.0, 1.0 - ref_len / len(hyp)))
    return bp * math.exp(log_sum / max_n)


def corpus_bleu(
    pairs: Iterable[tuple[Sequence[int], Sequence[int]]], max_n: int = 4
) -> float:
    """Corpus BLEU in [0, 1]: clipped counts and lengths are aggregated
    over the corpus before computing precisions and the brevity penalty;
    no smoothing. Zero aggregate matches (or totals) at any order give 0.
    """
    matched = [0] * max_n
    total = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, ref in pairs:
        counts, rlen = _ref_counts(ref, max_n)
        hyp = tuple(hyp)
        hyp_len += len(hyp)
        ref_len += rlen
        for n in range(1, max_n + 1):
            m, t = _clipped_matches(hyp, counts[n - 1], n)
            matched[n - 1] += m
            total[n - 1] += t
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        if matched[n - 1] == 0 or total[n - 1] == 0:
            return 0.0
        log_sum += math.log(matched[n - 1] / total[n - 1])
    bp = math.exp(min(0.0, 1.0 - ref_len / hyp_len))
    return bp * math.exp(log_sum / max_n)


def gleu(hyp: Sequence[int], ref: Sequence[int] | NGramIndex, max_n: int = 4) -> float:
    """Sentence GLEU in [0, 1]: min(precision, recall) over n-gram
    counts pooled across orders 1..max_n."""
    counts, _ = _ref_counts(ref, max_n)
    hyp = tuple(hyp)
    if not hyp:
        return 0.0
    matched = 0
    hyp_total = 0
    ref_total = 0
    for n in range(1, max_n + 1):
        m, t = _clipped_matches(hyp, counts[n - 1], n)
        matched += m
        hyp_total += t
        ref_total += sum(counts[n - 1].values())
    if hyp_total == 0 or ref_total == 0:
        return 0.0
    return min(matched / hyp_total, matched / ref_total)


_METRICS: dict[str, Callable] = {"bleu": sentence_bleu, "gleu": gleu}


def suffix_metric(
    prefix: Sequence[int],
    full: Sequence[int],
    ref: Sequence[int] | NGramIndex,
    metric: str = "bleu",
    max_n: int = 4,
) -> float:
    """Suffix delta: metric(full) - metric(prefix); the score earned by
    the continuation beyond the already-fixed prefix. `prefix` must be a
    prefix of `full`; an empty prefix scores 0 by convention."""
    prefix = tuple(prefix)
    full = tuple(full)
    if full[: len(prefix)] != prefix:
        raise ValueError("`prefix` is not a prefix of `full`")
    try:
        fn = _METRICS[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}, expected one of {sorted(_METRICS)}")
    return fn(full, ref, max_n) - fn(prefix, ref, max_n)


def linear_bleu_cost(
    hyp: Sequence[int],
    index: NGramIndex,
    theta: ThetaParams,
    context: Sequence[int] = (),
) -> float:
    """Linearized n-gram cost of a hypothesis against one reference.

    cost = theta[0] * |hyp| + sum_n theta[n] * (# n-grams of hyp present
    in the reference, unclipped). With `context`, n-grams may start
    inside the context but must end inside `hyp`, which makes the cost
    additive over concatenation: cost(a + b) = cost(a) + cost(b given
    context a).
    """
    if theta.order > index.max_order:
        raise ValueError(f"index holds orders up to {index.max_order}, need {theta.order}")
    th = theta.theta
    hyp = tuple(hyp)
    seq = tuple(context) + hyp
    base = len(seq) - len(hyp)
    cost = th[0] * len(hyp)
    for n in range(1, theta.order + 1):
        present = index.presence[n - 1]
        for i in range(max(0, base - n + 1), len(seq) - n + 1):
            if seq[i : i + n] in present:
                cost += th[n]
    return cost
