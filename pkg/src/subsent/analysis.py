"""Unnecessity and redundancy diagnostics, plus corpus descriptive statistics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

from .rouge import ngrams, rouge_n

OVERLAP_ORDERS = (1, 2, 3)


def ngram_overlap(tokens: Sequence[str], n: int) -> float:
    """1 - unique/total over the n-grams of ``tokens``; 0 if there are none."""
    return _overlap_from_counts(ngrams(list(tokens), n))


def _overlap_from_counts(counts: Counter) -> float:
    total = sum(counts.values())
    if total < 1:
        return 0.0
    return 1.0 - len(counts) / total


def units_overlap(units: Sequence[Sequence[str]], n: int, cross_boundaries: bool = False) -> float:
    """Overlap rate of a multi-unit summary.

    By default n-grams are pooled from each unit separately, so an n-gram
    never straddles two units.  ``cross_boundaries`` scores the plain
    concatenation instead.
    """
    if cross_boundaries:
        return ngram_overlap([t for u in units for t in u], n)
    pooled: Counter = Counter()
    for u in units:
        pooled.update(ngrams(list(u), n))
    return _overlap_from_counts(pooled)


def max_pairwise_overlap(units: Sequence[Sequence[str]], n: int, cross_boundaries: bool = False) -> float:
    if len(units) < 2:
        return units_overlap(units, n, cross_boundaries)
    return max(units_overlap([a, b], n, cross_boundaries) for a, b in combinations(units, 2))


@dataclass
class SummaryStats:
    word_count: int
    unit_count: int
    rouge1_precision: float
    rouge2_precision: float
    overlap: dict[int, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "word_count": self.word_count,
            "unit_count": self.unit_count,
            "rouge1_precision": self.rouge1_precision,
            "rouge2_precision": self.rouge2_precision,
            "overlap": {str(k): v for k, v in self.overlap.items()},
        }


def summary_stats(
    units: Sequence[Sequence[str]],
    reference: Sequence[str],
    pairwise: bool = False,
    cross_boundaries: bool = False,
) -> SummaryStats:
    units = [list(u) for u in units if len(u)]
    flat = [t for u in units for t in u]
    overlap_fn = max_pairwise_overlap if pairwise else units_overlap
    return SummaryStats(
        word_count=len(flat),
        unit_count=len(units),
        rouge1_precision=rouge_n(flat, reference, 1).precision,
        rouge2_precision=rouge_n(flat, reference, 2).precision,
        overlap={n: overlap_fn(units, n, cross_boundaries) for n in OVERLAP_ORDERS},
    )


def mean_summary_stats(stats: Sequence[SummaryStats]) -> dict:
    if not stats:
        raise ValueError("no summaries to aggregate")
    k = len(stats)
    return {
        "count": k,
        "word_count": sum(s.word_count for s in stats) / k,
        "unit_count": sum(s.unit_count for s in stats) / k,
        "rouge1_precision": sum(s.rouge1_precision for s in stats) / k,
        "rouge2_precision": sum(s.rouge2_precision for s in stats) / k,
        "overlap": {n: sum(s.overlap[n] for s in stats) / k for n in OVERLAP_ORDERS},
    }


@dataclass
class CorpusStats:
    documents: int
    doc_sentences: float
    doc_words: float
    doc_subsentences: float
    ref_sentences: float
    ref_words: float

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("#(Document)", self.documents),
            ("Doc Len (Sentence)", self.doc_sentences),
            ("Doc Len (Word)", self.doc_words),
            ("Doc Len (Sub-Sentence)", self.doc_subsentences),
            ("Ref Len (Sentence)", self.ref_sentences),
            ("Ref Len (Word)", self.ref_words),
        ]

    def format_table(self) -> str:
        lines = []
        for name, value in self.rows():
            cell = f"{value:d}" if isinstance(value, int) else f"{value:.2f}"
            lines.append(f"{name:<24}{cell:>12}")
        return "\n".join(lines)


def corpus_stats(corpus) -> CorpusStats:
    """Mean document/reference lengths; sub-sentences count chunks (chunking on the fly if absent)."""
    docs = list(corpus)
    if not docs:
        raise ValueError("empty corpus")
    k = len(docs)
    return CorpusStats(
        documents=k,
        doc_sentences=sum(len(d.sentences) for d in docs) / k,
        doc_words=sum(d.word_count for d in docs) / k,
        doc_subsentences=sum(len(d.all_chunks()) for d in docs) / k,
        ref_sentences=sum(len(d.reference_sentences) for d in docs) / k,
        ref_words=sum(len(d.reference) for d in docs) / k,
    )
