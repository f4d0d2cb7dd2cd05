"""Corpus records: one JSON document per line.

A record looks like::

    {"id": "doc-1",
     "sentences": [{"tokens": ["I", "said", "he", "left"],
                    "parse": "(S (NP I) (VP (VBD said) (SBAR (S he left))))",
                    "chunks": [{"span": [0, 2], "origin": "residual"}, ...],
                    "labels": [0, 1],
                    "label": 1}],
     "reference": [["he", "left"]]}

``parse``, ``chunks``, ``labels`` (chunk-level oracle) and ``label``
(sentence-level oracle) are optional.  ``reference`` is a list of
reference sentences; a flat token list is accepted as one sentence.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .chunking import DEFAULT_CLAUSE_TAGS, ORIGINS, Chunk, chunk_sentence, sentence_chunk
from .ptb import AlignmentError, ParseError, align_leaves, parse_bracketed

WORKERS_ENV = "SUBSENT_WORKERS"


class CorpusError(ValueError):
    """One or more invalid records; ``errors`` holds (line number, message) pairs."""

    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = errors
        shown = "; ".join(f"line {ln}: {msg}" for ln, msg in errors[:5])
        more = f" (+{len(errors) - 5} more)" if len(errors) > 5 else ""
        super().__init__(f"{len(errors)} invalid record(s): {shown}{more}")


@dataclass
class Sentence:
    tokens: list[str]
    parse: str | None = None
    chunks: list[Chunk] | None = None
    labels: list[int] | None = None
    label: int | None = None


@dataclass
class Document:
    id: str
    sentences: list[Sentence]
    reference_sentences: list[list[str]] = field(default_factory=list)

    @property
    def reference(self) -> list[str]:
        return [t for s in self.reference_sentences for t in s]

    @property
    def word_count(self) -> int:
        return sum(len(s.tokens) for s in self.sentences)

    def sentence_units(self) -> list[Chunk]:
        return [sentence_chunk(s.tokens, i) for i, s in enumerate(self.sentences)]

    def all_chunks(self, clause_tags=DEFAULT_CLAUSE_TAGS) -> list[Chunk]:
        out: list[Chunk] = []
        for i, s in enumerate(self.sentences):
            if s.chunks is not None:
                out.extend(s.chunks)
            else:
                out.extend(chunk_sentence(s.tokens, s.parse, clause_tags, sentence_index=i))
        return out

    def units(self, unit: str) -> list[Chunk]:
        if unit == "sentence":
            return self.sentence_units()
        if unit == "chunk":
            return self.all_chunks()
        raise ValueError(f"unknown unit {unit!r}; expected 'sentence' or 'chunk'")

    def unit_labels(self, unit: str) -> list[int] | None:
        if unit == "sentence":
            labels = [s.label for s in self.sentences]
        else:
            labels = []
            for s in self.sentences:
                if s.labels is None:
                    return None
                labels.extend(s.labels)
        if any(v is None for v in labels):
            return None
        return labels

    def set_unit_labels(self, unit: str, labels: Sequence[int]) -> None:
        if unit == "sentence":
            for s, y in zip(self.sentences, labels, strict=True):
                s.label = int(y)
            return
        pos = 0
        for i, s in enumerate(self.sentences):
            if s.chunks is None:
                s.chunks = chunk_sentence(s.tokens, s.parse, sentence_index=i)
            s.labels = [int(y) for y in labels[pos : pos + len(s.chunks)]]
            pos += len(s.chunks)
        if pos != len(labels):
            raise ValueError(f"{len(labels)} labels for {pos} chunks")

    def to_record(self) -> dict:
        sents = []
        for s in self.sentences:
            rec: dict = {"tokens": list(s.tokens)}
            if s.parse is not None:
                rec["parse"] = s.parse
            if s.chunks is not None:
                rec["chunks"] = [{"span": list(c.span), "origin": c.origin} for c in s.chunks]
            if s.labels is not None:
                rec["labels"] = list(s.labels)
            if s.label is not None:
                rec["label"] = s.label
            sents.append(rec)
        return {"id": self.id, "sentences": sents, "reference": [list(r) for r in self.reference_sentences]}


def _token_list(value, what: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(t, str) for t in value):
        raise ValueError(f"{what} must be a list of strings")
    return list(value)


def document_from_record(rec) -> Document:
    if not isinstance(rec, dict):
        raise ValueError("record is not a JSON object")
    doc_id = rec.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise ValueError("missing or non-string 'id'")
    raw_sents = rec.get("sentences")
    if not isinstance(raw_sents, list) or not raw_sents:
        raise ValueError("empty or missing sentence list")

    sentences = []
    for i, rs in enumerate(raw_sents):
        if not isinstance(rs, dict):
            raise ValueError(f"sentence {i} is not an object")
        tokens = _token_list(rs.get("tokens"), f"sentence {i} tokens")
        if not tokens:
            raise ValueError(f"empty sentence {i}")
        parse = rs.get("parse")
        if parse is not None:
            try:
                align_leaves(parse_bracketed(parse), tokens)
            except (ParseError, AlignmentError) as exc:
                raise ValueError(f"sentence {i} parse: {exc}") from exc
        chunks = None
        if rs.get("chunks") is not None:
            chunks = [_chunk_from_record(c, i, tokens) for c in rs["chunks"]]
            _check_partition(chunks, len(tokens), i)
        labels = rs.get("labels")
        if labels is not None:
            if chunks is None or len(labels) != len(chunks):
                raise ValueError(f"sentence {i}: labels length does not match chunks")
            labels = [_binary(y, f"sentence {i} labels") for y in labels]
        label = rs.get("label")
        if label is not None:
            label = _binary(label, f"sentence {i} label")
        sentences.append(Sentence(tokens, parse, chunks, labels, label))

    ref = rec.get("reference", [])
    if isinstance(ref, list) and ref and all(isinstance(t, str) for t in ref):
        ref_sents = [list(ref)]
    elif isinstance(ref, list):
        ref_sents = [_token_list(r, "reference sentence") for r in ref]
    else:
        raise ValueError("'reference' must be a token list or list of token lists")
    return Document(doc_id, sentences, ref_sents)


def _binary(v, what) -> int:
    if v not in (0, 1) or isinstance(v, bool):
        raise ValueError(f"{what} must be 0 or 1")
    return int(v)


def _chunk_from_record(rec, sent_index: int, tokens: list[str]) -> Chunk:
    try:
        start, end = rec["span"]
        origin = rec.get("origin", "whole-sentence")
    except (TypeError, KeyError, ValueError) as exc:
        raise ValueError(f"sentence {sent_index}: malformed chunk {rec!r}") from exc
    if origin not in ORIGINS or not (0 <= start < end <= len(tokens)):
        raise ValueError(f"sentence {sent_index}: invalid chunk {rec!r}")
    return Chunk(sent_index, (start, end), tuple(tokens[start:end]), origin)


def _check_partition(chunks: list[Chunk], n: int, sent_index: int) -> None:
    pos = 0
    for c in chunks:
        if c.start != pos:
            raise ValueError(f"sentence {sent_index}: chunks do not partition the sentence")
        pos = c.end
    if pos != n:
        raise ValueError(f"sentence {sent_index}: chunks do not partition the sentence")


def parse_corpus_lines(lines: Iterable[str]) -> list[Document]:
    docs, errors, seen = [], [], set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            doc = document_from_record(json.loads(line))
        except (ValueError, TypeError) as exc:  # JSONDecodeError is a ValueError
            errors.append((lineno, str(exc)))
            continue
        if doc.id in seen:
            errors.append((lineno, f"duplicate id {doc.id!r}"))
            continue
        seen.add(doc.id)
        docs.append(doc)
    if errors:
        raise CorpusError(errors)
    return docs


def load_corpus(path) -> list[Document]:
    with open(path, encoding="utf-8") as f:
        return parse_corpus_lines(f)


def dump_record(rec: dict) -> str:
    return json.dumps(rec, ensure_ascii=False)


def save_corpus(docs: Iterable[Document], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for d in docs:
            f.write(dump_record(d.to_record()) + "\n")


def convert_export(path) -> list[Document]:
    """Ingest a pre-tokenized, pre-parsed export (one JSON object per line).

    Expected keys: ``id``, ``article`` (list of space-tokenized sentences),
    ``highlights`` (same, for the reference) and optionally ``parses``
    (one bracketed tree per article sentence).  Token/parse mismatches are
    reported, not repaired.
    """
    docs, errors = [], []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                article = [s.split() for s in raw["article"]]
                parses = raw.get("parses") or [None] * len(article)
                if len(parses) != len(article):
                    raise ValueError(f"{len(parses)} parses for {len(article)} sentences")
                rec = {
                    "id": str(raw["id"]),
                    "sentences": [
                        {"tokens": toks, **({"parse": p} if p else {})} for toks, p in zip(article, parses) if toks
                    ],
                    "reference": [s.split() for s in raw["highlights"] if s.split()],
                }
                docs.append(document_from_record(rec))
            except (ValueError, TypeError, KeyError, AttributeError) as exc:
                errors.append((lineno, f"{type(exc).__name__}: {exc}"))
    if errors:
        raise CorpusError(errors)
    return docs


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def parallel_map(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    """Order-preserving map; uses a process pool when more than one worker is configured."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
