"""ROUGE-N and ROUGE-L over pre-tokenized text.

Tokens are case-folded; there is no stemming or stopword removal, so
scores are comparable only with other scores from this module.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> RougeScore:
        total = precision + recall
        f1 = 2 * precision * recall / total if total > 0 else 0.0
        return cls(precision, recall, f1)

    @classmethod
    def from_counts(cls, matches: int, n_candidate: int, n_reference: int) -> RougeScore:
        p = matches / n_candidate if n_candidate else 0.0
        r = matches / n_reference if n_reference else 0.0
        return cls.from_pr(p, r)


ZERO = RougeScore(0.0, 0.0, 0.0)


def normalize(tokens: Sequence[str]) -> list[str]:
    return [t.casefold() for t in tokens]


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    if n < 1:
        raise ValueError("n-gram order must be >= 1")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def ngram_match_counts(candidate: Sequence[str], reference: Sequence[str], n: int) -> tuple[int, int, int]:
    """(clipped matches, candidate n-grams, reference n-grams) after case-folding."""
    cand = ngrams(normalize(candidate), n)
    ref = ngrams(normalize(reference), n)
    matches = sum((cand & ref).values())
    return matches, sum(cand.values()), sum(ref.values())


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int = 1) -> RougeScore:
    return RougeScore.from_counts(*ngram_match_counts(candidate, reference, n))


def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            if x == y:
                cur.append(prev[j] + 1)
            else:
                cur.append(max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    cand, ref = normalize(candidate), normalize(reference)
    return RougeScore.from_counts(lcs_length(cand, ref), len(cand), len(ref))


def rouge_all(candidate: Sequence[str], reference: Sequence[str]) -> dict[str, RougeScore]:
    return {
        "rouge1": rouge_n(candidate, reference, 1),
        "rouge2": rouge_n(candidate, reference, 2),
        "rougeL": rouge_l(candidate, reference),
    }
