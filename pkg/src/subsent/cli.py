"""Command-line entry point: ``subsent <command> ...``.

Commands read and write corpus files with one JSON document per line.
Per-document work runs in a process pool sized by ``SUBSENT_WORKERS``
(default 1); output order always follows input order.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import random
import sys
from functools import partial
from pathlib import Path

from . import __version__
from .analysis import corpus_stats, mean_summary_stats, summary_stats, OVERLAP_ORDERS
from .chunking import DEFAULT_CLAUSE_TAGS, chunk_sentence
from .corpus import CorpusError, Document, convert_export, dump_record, load_corpus, parallel_map, save_corpus
from .oracle import DEFAULT_METRIC, METRICS, exhaustive_oracle, greedy_oracle
from .ptb import AlignmentError, ParseError
from .rouge import rouge_all
from .scorers.baselines import score_lead, score_textrank
from .scorers.neural import (
    MAX_TOKENS,
    build_vocab,
    examples_from_corpus,
    init_params,
    load_params,
    save_params,
    score_neural,
    train,
)
from .selection import DEFAULT_WORD_LIMIT, select_by_word_limit, select_top_k

DEFAULT_SEED = 13


class CliError(Exception):
    pass


@contextlib.contextmanager
def _open_out(path):
    if path is None or str(path) == "-":
        yield sys.stdout
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            yield f


def _load(path) -> list[Document]:
    if not Path(path).exists():
        raise CliError(f"input not found: {path}")
    return load_corpus(path)


# ---------------------------------------------------------------- chunk


def _chunk_doc(doc: Document, clause_tags, merge_below: int) -> Document:
    for i, s in enumerate(doc.sentences):
        s.chunks = chunk_sentence(s.tokens, s.parse, clause_tags, sentence_index=i, merge_residual_below=merge_below)
        s.labels = None
    return doc


def cmd_chunk(args) -> None:
    docs = _load(args.input)
    tags = frozenset(args.clause_tags.split(",")) if args.clause_tags else DEFAULT_CLAUSE_TAGS
    docs = parallel_map(partial(_chunk_doc, clause_tags=tags, merge_below=args.merge_residual), docs)
    _write_docs(docs, args.output)


def _write_docs(docs, output) -> None:
    with _open_out(output) as f:
        for d in docs:
            f.write(dump_record(d.to_record()) + "\n")


# ---------------------------------------------------------------- oracle


def _oracle_doc(doc: Document, unit: str, metric: str, max_units, exhaustive: bool) -> Document:
    units = [list(u.tokens) for u in doc.units(unit)]
    if exhaustive:
        result = exhaustive_oracle(units, doc.reference, metric)
    else:
        result = greedy_oracle(units, doc.reference, metric, max_units=max_units)
    doc.set_unit_labels(unit, result.labels)
    return doc


def cmd_oracle(args) -> None:
    docs = _load(args.input)
    fn = partial(_oracle_doc, unit=args.unit, metric=args.metric, max_units=args.max_units, exhaustive=args.exhaustive)
    _write_docs(parallel_map(fn, docs), args.output)


# ---------------------------------------------------------------- rouge


def _read_token_lines(path) -> list[tuple[str | None, list[str]]]:
    """Token sequences from summary/corpus records or plain whitespace-tokenized lines."""
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                rec = None
            if not isinstance(rec, dict):
                out.append((None, line.split()))
                continue
            if "tokens" in rec:
                toks = list(rec["tokens"])
            elif "reference" in rec:
                ref = rec["reference"]
                toks = [t for s in ref for t in s] if ref and isinstance(ref[0], list) else list(ref)
            elif "text" in rec:
                toks = rec["text"].split()
            else:
                raise CliError(f"{path}: record has no tokens, reference or text field")
            out.append((rec.get("id"), toks))
    return out


def cmd_rouge(args) -> None:
    for p in (args.candidates, args.references):
        if not Path(p).exists():
            raise CliError(f"input not found: {p}")
    cands = _read_token_lines(args.candidates)
    refs = _read_token_lines(args.references)
    if len(cands) != len(refs):
        raise CliError(f"{len(cands)} candidates but {len(refs)} references")
    names = ("rouge1", "rouge2", "rougeL")
    totals = {n: [0.0, 0.0, 0.0] for n in names}
    with _open_out(args.output) as f:
        f.write(f"{'doc':<20}" + "".join(f"{n + '-' + s:>11}" for n in names for s in ("P", "R", "F")) + "\n")
        for k, ((cid, cand), (rid, ref)) in enumerate(zip(cands, refs)):
            if cid is not None and rid is not None and cid != rid:
                raise CliError(f"line {k + 1}: candidate id {cid!r} does not match reference id {rid!r}")
            scores = rouge_all(cand, ref)
            label = str(cid or rid or k + 1)
            cells = []
            for n in names:
                s = scores[n]
                for j, v in enumerate((s.precision, s.recall, s.f1)):
                    totals[n][j] += v
                    cells.append(f"{v:11.4f}")
            f.write(f"{label:<20}" + "".join(cells) + "\n")
        m = max(len(cands), 1)
        f.write(f"{'MEAN':<20}" + "".join(f"{totals[n][j] / m:11.4f}" for n in names for j in range(3)) + "\n")


# ---------------------------------------------------------------- stats


def _summary_units_from_labels(doc: Document, unit: str):
    labels = doc.unit_labels(unit)
    if labels is None:
        return None
    return [list(u.tokens) for u, y in zip(doc.units(unit), labels) if y]


def _format_summary_block(title: str, agg: dict) -> str:
    lines = [f"{title} (n={agg['count']})",
             f"{'# (Unit)':<24}{agg['unit_count']:>12.2f}",
             f"{'# (Word)':<24}{agg['word_count']:>12.2f}",
             f"{'ROUGE-1 P':<24}{100 * agg['rouge1_precision']:>12.2f}",
             f"{'ROUGE-2 P':<24}{100 * agg['rouge2_precision']:>12.2f}"]
    for n in OVERLAP_ORDERS:
        lines.append(f"{f'{n}-gram Overlap (%)':<24}{100 * agg['overlap'][n]:>12.2f}")
    return "\n".join(lines)


def cmd_stats(args) -> None:
    docs = _load(args.input)
    by_id = {d.id: d for d in docs}
    blocks = ["Corpus\n" + corpus_stats(docs).format_table()]
    records = []
    opts = dict(pairwise=args.pairwise, cross_boundaries=args.cross_boundaries)

    for unit in ("sentence", "chunk"):
        stats = []
        for d in docs:
            units = _summary_units_from_labels(d, unit)
            if units is None:
                continue
            st = summary_stats(units, d.reference, **opts)
            stats.append(st)
            records.append({"id": d.id, "source": f"oracle-{unit}", **st.as_dict()})
        if stats:
            blocks.append(_format_summary_block(f"Oracle ({unit})", mean_summary_stats(stats)))

    if args.summaries:
        stats = []
        with open(args.summaries, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                rec = json.loads(line)
                doc = by_id.get(rec.get("id"))
                if doc is None:
                    raise CliError(f"summary for unknown document {rec.get('id')!r}")
                units = _units_of_summary_record(doc, rec)
                st = summary_stats(units, doc.reference, **opts)
                stats.append(st)
                records.append({"id": doc.id, "source": "summary", **st.as_dict()})
        if stats:
            blocks.append(_format_summary_block("Summaries", mean_summary_stats(stats)))

    with _open_out(args.output) as f:
        f.write("\n\n".join(blocks) + "\n")
    if args.records:
        with _open_out(args.records) as f:
            for r in records:
                f.write(json.dumps(r) + "\n")


def _units_of_summary_record(doc: Document, rec: dict) -> list[list[str]]:
    units = []
    for sel in rec["selected"]:
        toks = doc.sentences[sel["sentence"]].tokens
        start, end = sel["span"]
        units.append(toks[start:end])
    return units


# ---------------------------------------------------------------- summarize


def _summarize_doc(doc: Document, scorer: str, unit: str, params, word_limit, top_k, trigram_block, include_crossing):
    units = doc.units(unit)
    if scorer == "lead":
        scored = score_lead(units)
    elif scorer == "textrank":
        scored = score_textrank(units)
    else:
        scored = score_neural(params, units)
    if top_k is not None:
        summary = select_top_k(scored, top_k, trigram_block=trigram_block)
    else:
        summary = select_by_word_limit(scored, word_limit, include_crossing=include_crossing, trigram_block=trigram_block)
    return summary.to_record(doc.id)


def cmd_summarize(args) -> None:
    docs = _load(args.input)
    params = None
    if args.scorer == "neural":
        if not args.model:
            raise CliError("--scorer neural requires --model")
        if not Path(args.model).exists():
            raise CliError(f"model not found: {args.model}")
        params = load_params(args.model)
    fn = partial(
        _summarize_doc, scorer=args.scorer, unit=args.unit, params=params,
        word_limit=args.word_limit, top_k=args.top_k, trigram_block=args.trigram_block,
        include_crossing=not args.drop_crossing,
    )
    with _open_out(args.output) as f:
        for rec in parallel_map(fn, docs):
            f.write(dump_record(rec) + "\n")


# ---------------------------------------------------------------- train


def cmd_train(args) -> None:
    docs = _load(args.input)
    examples = examples_from_corpus(docs, args.unit)
    vocab = build_vocab(c for ex in examples for c in ex.chunks)
    params = init_params(vocab, d=args.dim, d_f=args.ffn_dim, heads=args.heads, seed=args.seed, max_tokens=args.max_tokens)
    history: list[float] = []
    params = train(examples, params, epochs=args.epochs, learning_rate=args.lr, seed=args.seed,
                   optimizer=args.optimizer, batch_size=args.batch_size, history=history)
    save_params(params, args.model_out)
    if history:
        print(f"trained {args.epochs} epochs; final loss {history[-1]:.6f}", file=sys.stderr)


# ---------------------------------------------------------------- sample / convert


def cmd_sample(args) -> None:
    docs = _load(args.input)
    rng = random.Random(args.seed)
    picked = sorted(rng.sample(range(len(docs)), min(args.n, len(docs))))
    with _open_out(args.output) as f:
        for i in picked:
            d = docs[i]
            rec = {
                "id": d.id,
                "document": [" ".join(s.tokens) for s in d.sentences],
                "reference": [" ".join(s) for s in d.reference_sentences],
                "unnecessity": None,
                "redundancy": None,
            }
            f.write(dump_record(rec) + "\n")


def cmd_convert(args) -> None:
    if not Path(args.input).exists():
        raise CliError(f"input not found: {args.input}")
    docs = convert_export(args.input)
    if args.output in (None, "-"):
        _write_docs(docs, None)
    else:
        save_corpus(docs, args.output)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subsent", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def io(sp, output=True):
        sp.add_argument("-i", "--input", required=True, help="corpus file (JSON lines)")
        if output:
            sp.add_argument("-o", "--output", default=None, help="output file (default: stdout)")

    sp = sub.add_parser("chunk", help="derive sub-sentential chunks from parses")
    io(sp)
    sp.add_argument("--clause-tags", default=None, help="comma-separated clause labels (default: S,SBAR,SBARQ,SINV,SQ)")
    sp.add_argument("--merge-residual", type=int, default=0, metavar="M",
                    help="merge residual chunks shorter than M tokens into the next chunk")
    sp.set_defaults(func=cmd_chunk)

    sp = sub.add_parser("oracle", help="label units with a ROUGE oracle")
    io(sp)
    sp.add_argument("--unit", choices=("sentence", "chunk"), default="chunk")
    sp.add_argument("--metric", choices=METRICS, default=DEFAULT_METRIC)
    sp.add_argument("--max-units", type=int, default=None)
    sp.add_argument("--exhaustive", action="store_true", help="exact search (at most 20 units per document)")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("rouge", help="score candidates against references")
    sp.add_argument("--candidates", required=True)
    sp.add_argument("--references", required=True)
    sp.add_argument("-o", "--output", default=None)
    sp.set_defaults(func=cmd_rouge)

    sp = sub.add_parser("stats", help="corpus, oracle and summary statistics")
    io(sp)
    sp.add_argument("--summaries", default=None, help="summary records from 'summarize'")
    sp.add_argument("--records", default=None, help="write per-document statistics here (JSON lines)")
    sp.add_argument("--pairwise", action="store_true", help="max pairwise overlap instead of whole-summary overlap")
    sp.add_argument("--cross-boundaries", action="store_true", help="count n-grams spanning unit boundaries")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("summarize", help="score and select units")
    io(sp)
    sp.add_argument("--scorer", choices=("lead", "textrank", "neural"), default="lead")
    sp.add_argument("--unit", choices=("sentence", "chunk"), default="chunk")
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--word-limit", type=int, default=DEFAULT_WORD_LIMIT)
    group.add_argument("--top-k", type=int, default=None)
    sp.add_argument("--trigram-block", action="store_true")
    sp.add_argument("--drop-crossing", action="store_true", help="stop before the unit that would exceed the word limit")
    sp.add_argument("--model", default=None, help="parameters written by 'train'")
    sp.set_defaults(func=cmd_summarize)

    sp = sub.add_parser("train", help="train the neural chunk scorer on oracle labels")
    io(sp, output=False)
    sp.add_argument("--model-out", required=True)
    sp.add_argument("--unit", choices=("sentence", "chunk"), default="chunk")
    sp.add_argument("--epochs", type=int, default=100)
    sp.add_argument("--lr", type=float, default=0.05)
    sp.add_argument("--dim", type=int, default=32)
    sp.add_argument("--ffn-dim", type=int, default=64)
    sp.add_argument("--heads", type=int, default=4)
    sp.add_argument("--max-tokens", type=int, default=MAX_TOKENS)
    sp.add_argument("--optimizer", choices=("sgd", "adam"), default="sgd")
    sp.add_argument("--batch-size", type=int, default=None)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("sample", help="export a random document sample for annotation")
    io(sp)
    sp.add_argument("--n", type=int, default=50)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("convert", help="ingest a pre-tokenized, pre-parsed export")
    io(sp)
    sp.set_defaults(func=cmd_convert)

    for sp in sub.choices.values():
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, CorpusError, ParseError, AlignmentError, ValueError, OSError) as exc:
        print(f"subsent {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
