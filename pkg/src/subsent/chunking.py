"""Sub-sentential extraction units from constituency trees.

Every non-root clause node is a candidate.  A candidate nested under
another non-root clause is replaced by its highest such ancestor, and
the sentence is cut at the boundaries of the surviving clauses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .ptb import ParseTree, align_leaves, base_label, parse_bracketed

DEFAULT_CLAUSE_TAGS = frozenset({"S", "SBAR", "SBARQ", "SINV", "SQ"})

CLAUSE_UNIT = "clause-unit"
RESIDUAL = "residual"
WHOLE_SENTENCE = "whole-sentence"
ORIGINS = (CLAUSE_UNIT, RESIDUAL, WHOLE_SENTENCE)


@dataclass(frozen=True)
class Chunk:
    sentence_index: int
    span: tuple[int, int]
    tokens: tuple[str, ...]
    origin: str = WHOLE_SENTENCE

    def __post_init__(self):
        start, end = self.span
        if end <= start:
            raise ValueError(f"empty chunk span {self.span}")
        if len(self.tokens) != end - start:
            raise ValueError(f"chunk has {len(self.tokens)} tokens for span {self.span}")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown chunk origin {self.origin!r}")

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]

    def __len__(self) -> int:
        return self.span[1] - self.span[0]

    @property
    def position(self) -> tuple[int, int]:
        return (self.sentence_index, self.span[0])


def _is_clause(node: ParseTree, clause_tags) -> bool:
    return base_label(node.label) in clause_tags


def clause_candidates(tree: ParseTree, clause_tags: Iterable[str] = DEFAULT_CLAUSE_TAGS) -> list[ParseTree]:
    """All non-root clause nodes, in document order."""
    tags = frozenset(clause_tags)
    return [node for node, ancestors in tree.iter_with_ancestors() if ancestors and _is_clause(node, tags)]


def select_units(tree: ParseTree, clause_tags: Iterable[str] = DEFAULT_CLAUSE_TAGS) -> list[tuple[int, int]]:
    tags = frozenset(clause_tags)
    selected: dict[int, ParseTree] = {}
    for node, ancestors in tree.iter_with_ancestors():
        if not ancestors or not _is_clause(node, tags):
            continue
        # ancestors[0] is the root, which never counts
        top = next((a for a in ancestors[1:] if _is_clause(a, tags)), node)
        selected.setdefault(id(top), top)
    return sorted({n.span for n in selected.values()})


def chunk_sentence(
    tokens: Sequence[str],
    tree: ParseTree | str | None = None,
    clause_tags: Iterable[str] = DEFAULT_CLAUSE_TAGS,
    sentence_index: int = 0,
    merge_residual_below: int = 0,
) -> list[Chunk]:
    """Split one sentence into chunks.

    Without a tree, or when the tree has no sub-sentential clause, the
    whole sentence is a single chunk.  Residual runs shorter than
    ``merge_residual_below`` tokens are folded into the following chunk
    (the preceding one if they end the sentence).
    """
    if not tokens:
        raise ValueError("cannot chunk an empty sentence")
    toks = tuple(tokens)
    n = len(toks)
    if isinstance(tree, str):
        tree = parse_bracketed(tree)
    units = []
    if tree is not None:
        align_leaves(tree, toks)
        units = select_units(tree, clause_tags)
    if not units:
        return [Chunk(sentence_index, (0, n), toks, WHOLE_SENTENCE)]

    pieces: list[tuple[int, int, str]] = []
    pos = 0
    for start, end in units:
        if start > pos:
            pieces.append((pos, start, RESIDUAL))
        pieces.append((start, end, CLAUSE_UNIT))
        pos = end
    if pos < n:
        pieces.append((pos, n, RESIDUAL))

    if merge_residual_below > 0:
        pieces = _merge_short_residuals(pieces, merge_residual_below)

    return [Chunk(sentence_index, (s, e), toks[s:e], origin) for s, e, origin in pieces]


def _merge_short_residuals(pieces, min_len):
    out: list[list] = []
    carry = None
    for s, e, origin in pieces:
        if carry is not None:
            s = carry
            carry = None
        if origin == RESIDUAL and e - s < min_len and len(pieces) > 1:
            carry = s
            continue
        out.append([s, e, origin])
    if carry is not None:
        if out:
            out[-1][1] = pieces[-1][1]
        else:
            out.append([carry, pieces[-1][1], RESIDUAL])
    return [tuple(p) for p in out]


def sentence_chunk(tokens: Sequence[str], sentence_index: int = 0) -> Chunk:
    return Chunk(sentence_index, (0, len(tokens)), tuple(tokens), WHOLE_SENTENCE)
