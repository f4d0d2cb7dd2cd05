"""Unsupervised unit scorers: LEAD position prior and TextRank."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..chunking import Chunk


@dataclass(frozen=True)
class ScoredUnit:
    chunk: Chunk
    score: float


class PageRankError(RuntimeError):
    def __init__(self, message: str, scores: np.ndarray, iterations: int):
        super().__init__(message)
        self.scores = scores
        self.iterations = iterations


def score_lead(units: Sequence[Chunk]) -> list[ScoredUnit]:
    return [ScoredUnit(u, 1.0 / (1 + i)) for i, u in enumerate(units)]


def _content(tokens: Sequence[str]) -> set[str]:
    return {t.casefold() for t in tokens if any(ch.isalnum() for ch in t)}


def build_similarity_graph(units: Sequence[Sequence[str]]) -> np.ndarray:
    """Symmetric weight matrix; w_ij = |shared content words| / (ln|u_i| + ln|u_j|).

    Units shorter than two tokens get no edges (the denominator would be
    zero or undefined).
    """
    n = len(units)
    content = [_content(u) for u in units]
    weights = np.zeros((n, n))
    for i in range(n):
        if len(units[i]) < 2:
            continue
        for j in range(i + 1, n):
            if len(units[j]) < 2:
                continue
            shared = len(content[i] & content[j])
            if shared:
                w = shared / (math.log(len(units[i])) + math.log(len(units[j])))
                weights[i, j] = weights[j, i] = w
    return weights


def pagerank(graph: np.ndarray, damping: float = 0.85, tol: float = 1e-6, max_iters: int = 100) -> np.ndarray:
    """Weighted PageRank by power iteration.

    Rank held by nodes without edges is spread uniformly, so isolated
    nodes receive only teleport mass and the scores sum to one.
    """
    w = np.asarray(graph, dtype=float)
    n = w.shape[0]
    if n == 0:
        return np.zeros(0)
    out_weight = w.sum(axis=1)
    dangling = out_weight <= 0
    trans = np.divide(w, out_weight[:, None], out=np.zeros_like(w), where=~dangling[:, None])
    scores = np.full(n, 1.0 / n)
    for it in range(1, max_iters + 1):
        spread = scores[dangling].sum() / n
        new = (1 - damping) / n + damping * (trans.T @ scores + spread)
        delta = np.abs(new - scores).max()
        scores = new
        if delta < tol:
            return scores
    raise PageRankError(f"pagerank did not converge in {max_iters} iterations", scores, max_iters)


def score_textrank(units: Sequence[Chunk], damping: float = 0.85) -> list[ScoredUnit]:
    if not units:
        return []
    scores = pagerank(build_similarity_graph([u.tokens for u in units]), damping=damping)
    return [ScoredUnit(u, float(s)) for u, s in zip(units, scores)]
