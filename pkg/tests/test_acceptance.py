"""Exit criteria for the toolkit, one test per criterion.

Run with ``pytest tests/test_acceptance.py``; a PASSED/FAILED line per
criterion is printed in the terminal summary.
"""

import os
import random
import time
from itertools import combinations

import numpy as np
import pytest

from subsent.analysis import corpus_stats, mean_summary_stats, ngram_overlap, summary_stats, units_overlap
from subsent.chunking import CLAUSE_UNIT, RESIDUAL, chunk_sentence, clause_candidates, select_units
from subsent.cli import main
from subsent.corpus import load_corpus, save_corpus
from subsent.oracle import exhaustive_oracle, greedy_oracle
from subsent.ptb import parse_bracketed
from subsent.rouge import lcs_length, rouge_l, rouge_n
from subsent.scorers.neural import TrainingExample, build_vocab, grad_check, init_params, train, transformer_block

from synth import clause_fragment_document, random_document, random_oracle_case, random_tree
from test_neural import CHUNKS, reference_block
from test_rouge import brute_lcs

CNNDM_ENV = "SUBSENT_CNNDM_EXPORT"


def test_criterion_1_rouge_hand_cases():
    t0 = time.perf_counter()
    cases = [
        (rouge_n("the cat sat".split(), "the cat sat".split(), 1), (1, 1, 1)),
        (rouge_n("the cat sat".split(), "the cat ran".split(), 1), (2 / 3, 2 / 3, 2 / 3)),
        (rouge_n("the the the".split(), ["the"], 1), (1 / 3, 1, 0.5)),
        (rouge_n("the cat sat".split(), "the cat ran".split(), 2), (0.5, 0.5, 0.5)),
        (rouge_l("a b c".split(), "a b c".split()), (1, 1, 1)),
        (rouge_l("a b c d".split(), "a c b d".split()), (0.75, 0.75, 0.75)),
        (rouge_l([], "a b".split()), (0, 0, 0)),
    ]
    for score, expected in cases:
        assert (score.precision, score.recall, score.f1) == pytest.approx(expected, abs=1e-6)
    assert lcs_length("a b c".split(), "a b c".split()) == 3
    assert lcs_length("a b c d".split(), "a c b d".split()) == 3
    assert lcs_length("a b".split(), "c d".split()) == 0

    rng = random.Random(1)
    for _ in range(200):
        a = [rng.choice("abcd") for _ in range(rng.randint(0, 8))]
        b = [rng.choice("abcd") for _ in range(rng.randint(0, 8))]
        assert lcs_length(a, b) == brute_lcs(a, b)
    assert time.perf_counter() - t0 < 1.0


def test_criterion_2_chunking_partition():
    t0 = time.perf_counter()
    rng = random.Random(2)
    fallbacks = 0
    for _ in range(1000):
        tree = parse_bracketed(random_tree(rng, max_depth=8))
        tokens = tree.tokens()
        chunks = chunk_sentence(tokens, tree)
        pos = 0
        for c in chunks:
            assert c.start == pos and c.end > c.start
            pos = c.end
        assert pos == len(tokens)
        units = select_units(tree)
        for a, b in combinations(units, 2):
            assert a[1] <= b[0] or b[1] <= a[0], "nested or overlapping units"
        whole = len(chunks) == 1 and chunks[0].origin == "whole-sentence"
        assert whole == (clause_candidates(tree) == [])
        fallbacks += whole
    assert 0 < fallbacks < 1000  # both branches exercised
    assert time.perf_counter() - t0 < 5.0


def test_criterion_3_worked_trace():
    tree = parse_bracketed("(S (NP I) (VP (VBD said) (SBAR (S (NP he) (VP (VBD left))))))")
    chunks = chunk_sentence(["I", "said", "he", "left"], tree)
    assert [(c.span, c.origin) for c in chunks] == [((0, 2), RESIDUAL), ((2, 4), CLAUSE_UNIT)]


def test_criterion_4_oracle_correctness():
    t0 = time.perf_counter()
    rng = random.Random(4)
    agree = 0
    for _ in range(500):
        units, reference = random_oracle_case(rng, max_units=10)
        g = greedy_oracle(units, reference, "rouge2-f1")
        e = exhaustive_oracle(units, reference, "rouge2-f1")
        agree += g.final_score.f1 == e.final_score.f1
        assert all(a < b for a, b in zip(g.trajectory, g.trajectory[1:]))
        best_single = max(rouge_n(u, reference, 2).f1 for u in units)
        assert g.final_score.f1 >= best_single
        assert e.final_score.f1 >= g.final_score.f1
    print(f"greedy == exhaustive on {agree}/500")
    assert agree >= 0.95 * 500
    assert time.perf_counter() - t0 < 30.0


def test_criterion_5_granularity_dominance():
    rng = random.Random(5)
    geq = strict = 0
    for k in range(500):
        doc = clause_fragment_document(rng, f"d{k}")
        sent_units = [list(s.tokens) for s in doc.sentences]
        chunk_units = [list(c.tokens) for c in doc.all_chunks()]
        chunk_f1 = exhaustive_oracle(chunk_units, doc.reference, "rouge2-f1").final_score.f1
        sent_f1 = exhaustive_oracle(sent_units, doc.reference, "rouge2-f1").final_score.f1
        geq += chunk_f1 >= sent_f1
        strict += chunk_f1 > sent_f1
    print(f"chunk >= sentence on {geq}/500, strictly on {strict}/500")
    assert geq == 500
    assert strict >= 250


def test_criterion_6_redundancy_metric():
    assert ngram_overlap(["a", "b", "a", "b"], 1) == 0.5
    assert ngram_overlap(["a", "b", "c"], 1) == 0.0
    assert ngram_overlap(["a", "b", "a", "b"], 2) == 1 - 2 / 3
    s = summary_stats([["a", "b"], ["a", "b"]], ["a", "b"])
    assert s.rouge1_precision == 0.5 and s.overlap[1] == 0.5

    rng = random.Random(6)
    crossing_drops = 0
    for _ in range(200):
        units = [[rng.choice("abcdef") for _ in range(rng.randint(1, 6))] for _ in range(rng.randint(1, 5))]
        i = rng.randrange(len(units))
        dup = units + [units[i]]
        before, after = summary_stats(units, ["a"]), summary_stats(dup, ["a"])
        for n in (1, 2, 3):
            assert after.overlap[n] >= before.overlap[n]
            assert units_overlap(dup, n) >= units_overlap(units, n)
            crossing_drops += units_overlap(dup, n, True) < units_overlap(units, n, True)
    # reported only: straddling n-grams can make duplication lower the rate
    print(f"cross-boundary variant decreased on {crossing_drops}/600 (summary, n) pairs")


def test_criterion_7_neural_scorer():
    t0 = time.perf_counter()
    vocab = build_vocab(CHUNKS + [["dog", "ran"]])
    doc = (CHUNKS + [["cat", "on"], ["mat"]], [1, 0, 1, 0])
    for seed in range(5):
        p = init_params(vocab, d=8, d_f=16, heads=2, seed=seed)
        assert grad_check(p, doc, eps=1e-5) < 1e-3

    rng = np.random.default_rng(7)
    p = init_params(vocab, d=4, d_f=8, heads=2, seed=7)
    x = rng.normal(size=(3, 4))
    np.testing.assert_allclose(transformer_block(x, p), reference_block(x, p), rtol=0, atol=1e-10)

    p = init_params(vocab, d=8, d_f=16, heads=4, seed=7)
    x = rng.normal(size=(6, 8))
    perm = rng.permutation(6)
    np.testing.assert_allclose(transformer_block(x[perm], p), transformer_block(x, p)[perm], rtol=0, atol=1e-10)

    history = []
    p = init_params(vocab, d=8, d_f=16, heads=4, seed=13)
    train([TrainingExample(CHUNKS, [1, 0])], p, epochs=500, learning_rate=0.05, history=history)
    assert min(history) < 0.1
    assert time.perf_counter() - t0 < 60.0


def _pipeline(workdir, corpus):
    workdir.mkdir()
    files = {k: workdir / f"{k}" for k in ("chunked.jsonl", "labeled.jsonl", "model.bin", "summaries.jsonl")}
    assert main(["chunk", "-i", str(corpus), "-o", str(files["chunked.jsonl"])]) == 0
    assert main(["oracle", "-i", str(files["chunked.jsonl"]), "-o", str(files["labeled.jsonl"]), "--unit", "chunk"]) == 0
    assert main(["train", "-i", str(files["labeled.jsonl"]), "--model-out", str(files["model.bin"]), "--epochs", "20",
                 "--dim", "8", "--ffn-dim", "16", "--heads", "2", "--seed", "13"]) == 0
    assert main(["summarize", "-i", str(files["labeled.jsonl"]), "-o", str(files["summaries.jsonl"]),
                 "--scorer", "neural", "--model", str(files["model.bin"]), "--word-limit", "12"]) == 0
    return {k: f.read_bytes() for k, f in files.items()}


def test_criterion_8_end_to_end_determinism(tmp_path):
    rng = random.Random(8)
    corpus = tmp_path / "corpus.jsonl"
    save_corpus([random_document(rng, f"doc{i}") for i in range(8)], corpus)
    first = _pipeline(tmp_path / "run1", corpus)
    second = _pipeline(tmp_path / "run2", corpus)
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], f"{name} differs between runs"
        assert first[name]


@pytest.mark.skipif(not os.environ.get(CNNDM_ENV), reason=f"set {CNNDM_ENV} to a pre-parsed CNN/DM test corpus")
def test_criterion_9_cnndm_directional():
    docs = load_corpus(os.environ[CNNDM_ENV])
    stats = corpus_stats(docs)
    print(f"Doc Len (Sub-Sentence) = {stats.doc_subsentences:.2f} (reference value 52.02)")
    assert abs(stats.doc_subsentences - 52.02) <= 0.15 * 52.02

    sent_stats, chunk_stats = [], []
    for d in docs:
        for unit, bucket in (("sentence", sent_stats), ("chunk", chunk_stats)):
            units = [list(u.tokens) for u in d.units(unit)]
            res = greedy_oracle(units, d.reference, "rouge2-f1")
            bucket.append(summary_stats([units[i] for i in res.selected], d.reference))
    sent, chunk = mean_summary_stats(sent_stats), mean_summary_stats(chunk_stats)
    print(f"oracle sentence: {sent}\noracle chunk: {chunk}")
    assert chunk["rouge1_precision"] > sent["rouge1_precision"]
    assert chunk["rouge2_precision"] > sent["rouge2_precision"]
    for n in (1, 2, 3):
        assert chunk["overlap"][n] < sent["overlap"][n]
