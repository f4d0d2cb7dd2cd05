"""Extractive oracles: greedy ROUGE maximisation and exhaustive search.

Units are token lists (whole sentences or chunks).  A selection is
always scored on the selected units concatenated in document order, so
n-grams that straddle two adjacent selected units count.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .rouge import RougeScore, lcs_length, ngrams, normalize, rouge_l, rouge_n

METRICS = ("rouge1-f1", "rouge2-f1", "rougeL-f1")
DEFAULT_METRIC = "rouge2-f1"
EXHAUSTIVE_CAP = 20


class OracleSizeError(ValueError):
    pass


@dataclass
class OracleResult:
    labels: list[int]
    order: list[int]
    trajectory: list[float] = field(default_factory=list)
    final_score: RougeScore = RougeScore(0.0, 0.0, 0.0)

    @property
    def selected(self) -> list[int]:
        return sorted(self.order)


def _order(metric: str) -> int | None:
    """n-gram order for ROUGE-N metrics, None for ROUGE-L."""
    if metric not in METRICS:
        raise ValueError(f"unknown oracle metric {metric!r}; expected one of {METRICS}")
    return None if metric == "rougeL-f1" else int(metric[5])


def _exact_f1(matches: int, n_cand: int, n_ref: int) -> Fraction:
    # 2PR/(P+R) reduces to 2m/(c+r); kept rational so ties compare exactly
    if matches == 0:
        return Fraction(0)
    return Fraction(2 * matches, n_cand + n_ref)


def _concat(units, indices) -> list[str]:
    out: list[str] = []
    for i in sorted(indices):
        out.extend(units[i])
    return out


class _Scorer:
    def __init__(self, reference: Sequence[str], metric: str):
        self.n = _order(metric)
        self.reference = normalize(reference)
        if self.n is not None:
            self.ref_counts = ngrams(self.reference, self.n)
            self.n_ref = sum(self.ref_counts.values())

    def exact(self, tokens: Sequence[str]) -> Fraction:
        if self.n is None:
            return _exact_f1(lcs_length(tokens, self.reference), len(tokens), len(self.reference))
        cand = ngrams(tokens, self.n)
        matches = sum((cand & self.ref_counts).values())
        return _exact_f1(matches, sum(cand.values()), self.n_ref)

    def score(self, tokens: Sequence[str]) -> RougeScore:
        if self.n is None:
            return rouge_l(tokens, self.reference)
        return rouge_n(tokens, self.reference, self.n)


def greedy_oracle(
    units: Sequence[Sequence[str]],
    reference: Sequence[str],
    metric: str = DEFAULT_METRIC,
    max_units: int | None = None,
) -> OracleResult:
    """Add the unit with the largest strict metric gain until nothing improves.

    Ties go to the smallest unit index.
    """
    scorer = _Scorer(reference, metric)
    norm_units = [normalize(u) for u in units]
    selected: list[int] = []
    trajectory: list[float] = []
    current = Fraction(0)
    cap = len(norm_units) if max_units is None else min(max_units, len(norm_units))
    while len(selected) < cap:
        best_i, best_val = -1, current
        for i in range(len(norm_units)):
            if i in selected:
                continue
            val = scorer.exact(_concat(norm_units, selected + [i]))
            if val > best_val:
                best_i, best_val = i, val
        if best_i < 0:
            break
        selected.append(best_i)
        current = best_val
        trajectory.append(float(best_val))
    return _result(norm_units, selected, trajectory, scorer)


def _result(norm_units, order, trajectory, scorer) -> OracleResult:
    labels = [0] * len(norm_units)
    for i in order:
        labels[i] = 1
    final = scorer.score(_concat(norm_units, order))
    return OracleResult(labels, list(order), trajectory, final)


def exhaustive_oracle(
    units: Sequence[Sequence[str]],
    reference: Sequence[str],
    metric: str = DEFAULT_METRIC,
) -> OracleResult:
    """Best subset over all 2^N selections (N <= 20).

    Ties prefer fewer units, then the lexicographically smallest index
    set.  The trajectory holds the single optimal value (empty when the
    best selection is empty).
    """
    if len(units) > EXHAUSTIVE_CAP:
        raise OracleSizeError(f"exhaustive oracle refuses {len(units)} units (cap {EXHAUSTIVE_CAP})")
    scorer = _Scorer(reference, metric)
    norm_units = [normalize(u) for u in units]
    if scorer.n is None:
        best = _exhaustive_brute(norm_units, scorer)
    else:
        best = _exhaustive_ngram(norm_units, scorer)
    value, subset = best
    trajectory = [float(value)] if subset else []
    return _result(norm_units, list(subset), trajectory, scorer)


def _better(val, subset, best_val, best_subset) -> bool:
    if val != best_val:
        return val > best_val
    if len(subset) != len(best_subset):
        return len(subset) < len(best_subset)
    return subset < best_subset


def _exhaustive_brute(norm_units, scorer):
    best_val, best_subset = Fraction(0), ()
    n = len(norm_units)
    for mask in range(1, 1 << n):
        subset = tuple(i for i in range(n) if mask >> i & 1)
        val = scorer.exact(_concat(norm_units, subset))
        if _better(val, subset, best_val, best_subset):
            best_val, best_subset = val, subset
    return best_val, best_subset


def _exhaustive_ngram(norm_units, scorer):
    """Depth-first enumeration with incremental clipped n-gram counts."""
    n = scorer.n
    ref_counts = scorer.ref_counts
    cand: Counter = Counter()
    state = {"matches": 0, "total": 0}
    best = [Fraction(0), ()]
    chosen: list[int] = []

    def add(grams, sign):
        for g in grams:
            if sign > 0:
                if cand[g] < ref_counts.get(g, 0):
                    state["matches"] += 1
                cand[g] += 1
            else:
                cand[g] -= 1
                if cand[g] < ref_counts.get(g, 0):
                    state["matches"] -= 1
            state["total"] += sign

    def visit(start: int, tail: tuple):
        for i in range(start, len(norm_units)):
            seq = tail + tuple(norm_units[i])
            grams = [seq[k : k + n] for k in range(len(seq) - n + 1)]
            add(grams, +1)
            chosen.append(i)
            val = _exact_f1(state["matches"], state["total"], scorer.n_ref)
            subset = tuple(chosen)
            if _better(val, subset, best[0], best[1]):
                best[0], best[1] = val, subset
            visit(i + 1, seq[len(seq) - (n - 1) :] if n > 1 else ())
            chosen.pop()
            add(grams, -1)

    visit(0, ())
    return best[0], best[1]
