"""Turning scored units into a summary."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .chunking import WHOLE_SENTENCE, Chunk
from .rouge import ngrams, normalize
from .scorers.baselines import ScoredUnit

DEFAULT_WORD_LIMIT = 60


@dataclass
class Summary:
    selected: list[Chunk]

    @property
    def word_count(self) -> int:
        return sum(len(c) for c in self.selected)

    @property
    def units(self) -> list[list[str]]:
        return [list(c.tokens) for c in self.selected]

    @property
    def tokens(self) -> list[str]:
        return [t for c in self.selected for t in c.tokens]

    @property
    def text(self) -> str:
        # separator follows the preceding unit: " . " after whole sentences, " ; " after sub-sentential units
        parts = []
        for i, c in enumerate(self.selected):
            if i:
                parts.append(" . " if self.selected[i - 1].origin == WHOLE_SENTENCE else " ; ")
            parts.append(" ".join(c.tokens))
        return "".join(parts)

    def to_record(self, doc_id: str | None = None) -> dict:
        rec = {} if doc_id is None else {"id": doc_id}
        rec["selected"] = [{"sentence": c.sentence_index, "span": list(c.span), "origin": c.origin} for c in self.selected]
        rec["word_count"] = self.word_count
        rec["text"] = self.text
        rec["tokens"] = self.tokens
        return rec


def _ranked(scored: Sequence[ScoredUnit]) -> list[ScoredUnit]:
    return sorted(scored, key=lambda s: (-s.score, s.chunk.position))


def _in_document_order(chunks) -> Summary:
    return Summary(sorted(chunks, key=lambda c: c.position))


class _TrigramBlocker:
    def __init__(self):
        self.seen: set = set()

    def blocks(self, chunk: Chunk) -> bool:
        return bool(set(ngrams(normalize(chunk.tokens), 3)) & self.seen)

    def add(self, chunk: Chunk) -> None:
        self.seen |= set(ngrams(normalize(chunk.tokens), 3))


def select_by_word_limit(
    scored: Sequence[ScoredUnit],
    limit: int = DEFAULT_WORD_LIMIT,
    include_crossing: bool = True,
    trigram_block: bool = False,
) -> Summary:
    """Take units by descending score until the summary reaches ``limit`` words.

    The unit that crosses the limit is kept unless ``include_crossing`` is
    false, in which case selection stops just before it.
    """
    if limit <= 0:
        raise ValueError("word limit must be positive")
    chosen: list[Chunk] = []
    words = 0
    blocker = _TrigramBlocker() if trigram_block else None
    for s in _ranked(scored):
        if words >= limit:
            break
        if blocker is not None and blocker.blocks(s.chunk):
            continue
        if not include_crossing and words + len(s.chunk) > limit:
            break
        chosen.append(s.chunk)
        words += len(s.chunk)
        if blocker is not None:
            blocker.add(s.chunk)
    return _in_document_order(chosen)


def select_top_k(scored: Sequence[ScoredUnit], k: int = 3, trigram_block: bool = False) -> Summary:
    if k < 1:
        raise ValueError("k must be >= 1")
    chosen: list[Chunk] = []
    blocker = _TrigramBlocker() if trigram_block else None
    for s in _ranked(scored):
        if len(chosen) == k:
            break
        if blocker is not None:
            if blocker.blocks(s.chunk):
                continue
            blocker.add(s.chunk)
        chosen.append(s.chunk)
    return _in_document_order(chosen)
