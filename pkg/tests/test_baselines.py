import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subsent.chunking import sentence_chunk
from subsent.scorers import PageRankError, build_similarity_graph, pagerank, score_lead, score_textrank


def pagerank_closed_form(w, damping=0.85):
    """Solve the PageRank fixed point directly (graphs without dangling nodes)."""
    n = w.shape[0]
    trans = w / w.sum(axis=1, keepdims=True)
    return np.linalg.solve(np.eye(n) - damping * trans.T, np.full(n, (1 - damping) / n))


def test_lead_scores():
    units = [sentence_chunk(["a"], i) for i in range(3)]
    assert [s.score for s in score_lead(units)] == pytest.approx([1, 0.5, 1 / 3])
    assert score_lead([]) == []
    scores = [s.score for s in score_lead([sentence_chunk(["a"], i) for i in range(20)])]
    assert all(a > b for a, b in zip(scores, scores[1:]))


def test_similarity_graph():
    assert build_similarity_graph([["a", "b"], ["c", "d"]])[0, 1] == 0
    w = build_similarity_graph([["a", "b"], ["a", "b"]])
    assert w[0, 1] == pytest.approx(2 / (2 * math.log(2)))
    assert w[0, 1] == pytest.approx(1.4427, abs=1e-4)
    assert (w == w.T).all() and (np.diag(w) == 0).all()
    assert build_similarity_graph([["a", "b"]]).shape == (1, 1)
    # one-token units get no edges
    assert build_similarity_graph([["a"], ["a", "b"]])[0, 1] == 0


def test_pagerank_two_nodes():
    s = pagerank(np.array([[0, 1.0], [1.0, 0]]))
    assert s[0] == pytest.approx(s[1]) and s.sum() == pytest.approx(1)


def test_pagerank_chain_middle_highest():
    w = np.array([[0, 1.0, 0], [1.0, 0, 1.0], [0, 1.0, 0]])
    s = pagerank(w, tol=1e-12, max_iters=1000)
    assert s[1] > s[0] and s[1] > s[2]
    np.testing.assert_allclose(s, pagerank_closed_form(w), atol=1e-10)


def test_pagerank_edgeless():
    s = pagerank(np.zeros((4, 4)))
    np.testing.assert_allclose(s, 0.25)


def test_pagerank_nonconvergence_carries_iterate():
    w = np.array([[0, 1.0, 0], [1.0, 0, 1.0], [0, 1.0, 0]])
    with pytest.raises(PageRankError) as info:
        pagerank(w, tol=1e-15, max_iters=2)
    assert info.value.scores.shape == (3,)


def test_textrank_scores_units():
    units = [sentence_chunk(t.split(), i) for i, t in enumerate(["a b c", "a b d", "x y"])]
    scored = score_textrank(units)
    assert scored[0].score == pytest.approx(scored[1].score)
    assert scored[2].score < scored[0].score


@given(st.lists(st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=5), min_size=1, max_size=8))
def test_pagerank_is_a_distribution(units):
    s = pagerank(build_similarity_graph(units))
    assert (s >= 0).all()
    assert s.sum() == pytest.approx(1.0, abs=1e-9)
