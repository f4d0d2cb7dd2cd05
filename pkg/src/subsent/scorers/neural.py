"""Toy-scale chunk scorer: mean-pooled token embeddings, one self-attention
Transformer block over the chunk sequence, and a sigmoid output head.

Everything is float64 numpy with hand-written gradients.  There are no
positional features at chunk level, so the block is permutation
equivariant over chunks.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..chunking import Chunk
from .baselines import ScoredUnit

UNK = "<unk>"
BCE_EPS = 1e-7
MAX_TOKENS = 512
MAGIC = b"SSEPARAM"
FORMAT_VERSION = 1

# serialization and gradient-check order
ARRAY_NAMES = ("E", "W_q", "W_k", "W_v", "W_m", "W_1", "b_1", "W_2", "b_2", "g_1", "beta_1", "g_2", "beta_2", "W_o", "b_o")


class DimensionError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class ScorerParams:
    vocab: dict[str, int]
    E: np.ndarray
    W_q: np.ndarray  # (heads, d, d_h)
    W_k: np.ndarray
    W_v: np.ndarray
    W_m: np.ndarray  # (d, d)
    W_1: np.ndarray
    b_1: np.ndarray
    W_2: np.ndarray
    b_2: np.ndarray
    g_1: np.ndarray
    beta_1: np.ndarray
    g_2: np.ndarray
    beta_2: np.ndarray
    W_o: np.ndarray
    b_o: np.ndarray  # shape ()
    d: int = 32
    d_f: int = 64
    heads: int = 4
    ln_epsilon: float = 1e-5
    max_tokens: int = MAX_TOKENS

    def __post_init__(self):
        if self.d % self.heads:
            raise DimensionError(f"d={self.d} is not divisible by heads={self.heads}")
        if self.ln_epsilon <= 0:
            raise ValueError("ln_epsilon must be positive")

    @property
    def d_h(self) -> int:
        return self.d // self.heads

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in ARRAY_NAMES}

    def copy(self) -> ScorerParams:
        kwargs = {name: arr.copy() for name, arr in self.arrays().items()}
        return ScorerParams(
            vocab=dict(self.vocab), d=self.d, d_f=self.d_f, heads=self.heads,
            ln_epsilon=self.ln_epsilon, max_tokens=self.max_tokens, **kwargs,
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays().values())

    def token_id(self, token: str) -> int:
        return self.vocab.get(token.casefold(), self.vocab[UNK])


def build_vocab(token_streams: Iterable[Iterable[str]]) -> dict[str, int]:
    words = sorted({t.casefold() for stream in token_streams for t in stream} - {UNK})
    vocab = {UNK: 0}
    for w in words:
        vocab[w] = len(vocab)
    return vocab


def init_params(
    vocab: dict[str, int],
    d: int = 32,
    d_f: int = 64,
    heads: int = 4,
    seed: int = 13,
    ln_epsilon: float = 1e-5,
    max_tokens: int = MAX_TOKENS,
) -> ScorerParams:
    """Matrices uniform in +-1/sqrt(d); biases zero, LayerNorm gains one."""
    if d % heads:
        raise DimensionError(f"d={d} is not divisible by heads={heads}")
    rng = np.random.default_rng(seed)
    a = 1.0 / np.sqrt(d)
    d_h = d // heads

    def u(*shape):
        return rng.uniform(-a, a, size=shape)

    return ScorerParams(
        vocab=dict(vocab),
        E=u(len(vocab), d),
        W_q=u(heads, d, d_h), W_k=u(heads, d, d_h), W_v=u(heads, d, d_h),
        W_m=u(d, d),
        W_1=u(d, d_f), b_1=np.zeros(d_f),
        W_2=u(d_f, d), b_2=np.zeros(d),
        g_1=np.ones(d), beta_1=np.zeros(d), g_2=np.ones(d), beta_2=np.zeros(d),
        W_o=u(d), b_o=np.zeros(()),
        d=d, d_f=d_f, heads=heads, ln_epsilon=ln_epsilon, max_tokens=max_tokens,
    )


# ---------------------------------------------------------------- forward


def chunk_ids(params: ScorerParams, chunks: Sequence[Sequence[str]]) -> list[np.ndarray]:
    """Token ids per chunk, truncated to the first ``max_tokens`` document tokens.

    Chunks that start past the window are dropped, so the result may be
    shorter than ``chunks``.
    """
    out = []
    budget = params.max_tokens
    for toks in chunks:
        if budget <= 0:
            break
        if not len(toks):
            raise ValueError("cannot pool an empty chunk")
        ids = [params.token_id(t) for t in toks[:budget]]
        budget -= len(ids)
        out.append(np.array(ids, dtype=np.int64))
    return out


def embed_and_pool(tokens: Sequence[str], params: ScorerParams) -> np.ndarray:
    if not len(tokens):
        raise ValueError("cannot pool an empty chunk")
    ids = [params.token_id(t) for t in tokens]
    return params.E[ids].mean(axis=0)


def _layer_norm(z, g, beta, eps):
    mu = z.mean(axis=-1, keepdims=True)
    c = z - mu
    inv = 1.0 / np.sqrt((c * c).mean(axis=-1, keepdims=True) + eps)
    xhat = c * inv
    return g * xhat + beta, (xhat, inv)


def _layer_norm_back(dy, g, cache):
    xhat, inv = cache
    dxhat = dy * g
    dz = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dz, (dy * xhat).sum(axis=0), dy.sum(axis=0)


def _softmax(s):
    s = s - s.max(axis=-1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=-1, keepdims=True)


def _block_forward(x, p: ScorerParams):
    n = x.shape[0]
    q = np.einsum("nd,hde->hne", x, p.W_q)
    k = np.einsum("nd,hde->hne", x, p.W_k)
    v = np.einsum("nd,hde->hne", x, p.W_v)
    scale = 1.0 / np.sqrt(p.d_h)
    attn = _softmax(np.einsum("hne,hme->hnm", q, k) * scale)
    heads_out = np.einsum("hnm,hme->hne", attn, v)
    concat = heads_out.transpose(1, 0, 2).reshape(n, p.d)
    mh = concat @ p.W_m
    y1, ln1 = _layer_norm(x + mh, p.g_1, p.beta_1, p.ln_epsilon)
    pre = y1 @ p.W_1 + p.b_1
    act = np.maximum(pre, 0.0)
    ffn = act @ p.W_2 + p.b_2
    y2, ln2 = _layer_norm(y1 + ffn, p.g_2, p.beta_2, p.ln_epsilon)
    cache = dict(x=x, q=q, k=k, v=v, attn=attn, concat=concat, y1=y1, ln1=ln1, pre=pre, act=act, ln2=ln2, scale=scale)
    return y2, cache


def transformer_block(pooled: np.ndarray, params: ScorerParams) -> np.ndarray:
    x = np.asarray(pooled, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] != params.d:
        raise DimensionError(f"expected a (n >= 1, {params.d}) chunk matrix, got shape {x.shape}")
    return _block_forward(x, params)[0]


def predict_prob(vec: np.ndarray, params: ScorerParams) -> np.ndarray | float:
    z = np.asarray(vec) @ params.W_o + params.b_o
    return _sigmoid(z)


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def _pool(params: ScorerParams, ids: list[np.ndarray]) -> np.ndarray:
    return np.stack([params.E[i].mean(axis=0) for i in ids])


def forward_probs(params: ScorerParams, chunks: Sequence[Sequence[str]]) -> np.ndarray:
    ids = chunk_ids(params, chunks)
    if not ids:
        return np.zeros(0)
    y2, _ = _block_forward(_pool(params, ids), params)
    return np.atleast_1d(predict_prob(y2, params))


def score_neural(params: ScorerParams, units: Sequence[Chunk]) -> list[ScoredUnit]:
    """Probabilities for the units inside the truncation window (later units are omitted)."""
    probs = forward_probs(params, [u.tokens for u in units])
    return [ScoredUnit(u, float(p)) for u, p in zip(units, probs)]


# ---------------------------------------------------------------- loss and gradients


def bce_loss(probs, labels, reduction: str = "mean") -> float:
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probs.shape != labels.shape:
        raise ValueError(f"{probs.shape[0] if probs.ndim else 1} probabilities for "
                         f"{labels.shape[0] if labels.ndim else 1} labels")
    pc = np.clip(probs, BCE_EPS, 1 - BCE_EPS)
    terms = -(labels * np.log(pc) + (1 - labels) * np.log(1 - pc))
    return float(terms.sum() if reduction == "sum" else terms.mean())


def loss_and_grads(params: ScorerParams, chunks, labels, normalizer: float | None = None):
    """Loss summed over chunks divided by ``normalizer`` (default: chunk count), with gradients."""
    p = params
    ids = chunk_ids(p, chunks)
    y = np.asarray(labels[: len(ids)], dtype=float)
    n = len(ids)
    grads = {name: np.zeros_like(arr) for name, arr in p.arrays().items()}
    if n == 0:
        return 0.0, grads
    norm = float(n if normalizer is None else normalizer)

    x = _pool(p, ids)
    y2, c = _block_forward(x, p)
    z = y2 @ p.W_o + p.b_o
    prob = _sigmoid(z)
    loss = bce_loss(prob, y, reduction="sum") / norm

    pc = np.clip(prob, BCE_EPS, 1 - BCE_EPS)
    inside = (prob > BCE_EPS) & (prob < 1 - BCE_EPS)
    dprob = (-y / pc + (1 - y) / (1 - pc)) * inside / norm
    dz = dprob * prob * (1 - prob)

    grads["W_o"] = y2.T @ dz
    grads["b_o"] = np.asarray(dz.sum())
    dy2 = np.outer(dz, p.W_o)

    dz2, grads["g_2"], grads["beta_2"] = _layer_norm_back(dy2, p.g_2, c["ln2"])
    dy1 = dz2.copy()
    dffn = dz2
    grads["W_2"] = c["act"].T @ dffn
    grads["b_2"] = dffn.sum(axis=0)
    dpre = (dffn @ p.W_2.T) * (c["pre"] > 0)
    grads["W_1"] = c["y1"].T @ dpre
    grads["b_1"] = dpre.sum(axis=0)
    dy1 += dpre @ p.W_1.T

    dz1, grads["g_1"], grads["beta_1"] = _layer_norm_back(dy1, p.g_1, c["ln1"])
    dx = dz1.copy()
    grads["W_m"] = c["concat"].T @ dz1
    dconcat = dz1 @ p.W_m.T
    dheads = dconcat.reshape(n, p.heads, p.d_h).transpose(1, 0, 2)
    attn, q, k, v = c["attn"], c["q"], c["k"], c["v"]
    dattn = np.einsum("hne,hme->hnm", dheads, v)
    dv = np.einsum("hnm,hne->hme", attn, dheads)
    dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True)) * c["scale"]
    dq = np.einsum("hnm,hme->hne", dscores, k)
    dk = np.einsum("hnm,hne->hme", dscores, q)
    grads["W_q"] = np.einsum("nd,hne->hde", x, dq)
    grads["W_k"] = np.einsum("nd,hne->hde", x, dk)
    grads["W_v"] = np.einsum("nd,hne->hde", x, dv)
    dx += np.einsum("hne,hde->nd", dq, p.W_q)
    dx += np.einsum("hne,hde->nd", dk, p.W_k)
    dx += np.einsum("hne,hde->nd", dv, p.W_v)

    for row, tok_ids in zip(dx, ids):
        np.add.at(grads["E"], tok_ids, row / len(tok_ids))
    return loss, grads


# ---------------------------------------------------------------- training


@dataclass
class TrainingExample:
    chunks: list[list[str]]
    labels: list[int]


def examples_from_corpus(docs, unit: str = "chunk") -> list[TrainingExample]:
    out = []
    for doc in docs:
        labels = doc.unit_labels(unit)
        if labels is None:
            raise ValueError(f"document {doc.id!r} has no {unit}-level oracle labels")
        out.append(TrainingExample([list(u.tokens) for u in doc.units(unit)], labels))
    return out


def corpus_loss_and_grads(params: ScorerParams, examples: Sequence[TrainingExample]):
    ids_per_doc = [len(chunk_ids(params, ex.chunks)) for ex in examples]
    total = sum(ids_per_doc)
    loss = 0.0
    grads = {name: np.zeros_like(arr) for name, arr in params.arrays().items()}
    # fixed reduction order: documents in corpus order
    for ex in examples:
        l, g = loss_and_grads(params, ex.chunks, ex.labels, normalizer=total)
        loss += l
        for name in grads:
            grads[name] += g[name]
    return loss, grads


@dataclass
class _Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    s: dict = field(default_factory=dict)

    def step(self, params: ScorerParams, grads: dict, lr: float) -> None:
        self.t += 1
        for name, g in grads.items():
            m = self.m.get(name, np.zeros_like(g)) * self.beta1 + (1 - self.beta1) * g
            s = self.s.get(name, np.zeros_like(g)) * self.beta2 + (1 - self.beta2) * g * g
            self.m[name], self.s[name] = m, s
            mhat = m / (1 - self.beta1**self.t)
            shat = s / (1 - self.beta2**self.t)
            arr = getattr(params, name)
            arr -= lr * mhat / (np.sqrt(shat) + self.eps)


def train(
    examples: Sequence[TrainingExample],
    params: ScorerParams,
    epochs: int = 100,
    learning_rate: float = 0.05,
    seed: int = 13,
    optimizer: str = "sgd",
    batch_size: int | None = None,
    history: list | None = None,
) -> ScorerParams:
    """Gradient descent on mean BCE; returns new params (the input is not modified).

    With ``batch_size=None`` every epoch is a single full-batch step.
    Minibatches are drawn from a ``seed``-ed permutation.
    """
    if optimizer not in ("sgd", "adam"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    params = params.copy()
    rng = np.random.default_rng(seed)
    adam = _Adam() if optimizer == "adam" else None
    examples = list(examples)
    for epoch in range(epochs):
        if batch_size is None:
            batches = [examples]
        else:
            order = rng.permutation(len(examples))
            batches = [[examples[i] for i in order[s : s + batch_size]] for s in range(0, len(examples), batch_size)]
        for batch in batches:
            loss, grads = corpus_loss_and_grads(params, batch)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            if adam is not None:
                adam.step(params, grads, learning_rate)
            else:
                for name, g in grads.items():
                    arr = getattr(params, name)
                    arr -= learning_rate * g
        if history is not None:
            history.append(corpus_loss_and_grads(params, examples)[0])
    if not params.is_finite():
        raise TrainingDiverged("parameters became non-finite")
    return params


def grad_check(params: ScorerParams, document, eps: float = 1e-5, report: dict | None = None) -> float:
    """Max relative error between analytic gradients and central differences.

    ``document`` is a ``TrainingExample`` or a ``(chunks, labels)`` pair.
    Relative error falls back to absolute error when both gradients are
    below 1e-8.  Embedding rows of tokens absent from the document have
    zero gradient on both sides and are skipped.
    """
    if isinstance(document, TrainingExample):
        chunks, labels = document.chunks, document.labels
    else:
        chunks, labels = document
    _, analytic = loss_and_grads(params, chunks, labels)
    probe = params.copy()
    used = sorted({int(i) for ids in chunk_ids(params, chunks) for i in ids})
    worst = 0.0
    for name, arr in probe.arrays().items():
        flat = arr.reshape(-1)
        if name == "E":
            indices = [r * params.d + c for r in used for c in range(params.d)]
        else:
            indices = range(flat.size)
        group_worst = 0.0
        for idx in indices:
            orig = flat[idx]
            flat[idx] = orig + eps
            lp = loss_and_grads(probe, chunks, labels)[0]
            flat[idx] = orig - eps
            lm = loss_and_grads(probe, chunks, labels)[0]
            flat[idx] = orig
            numeric = (lp - lm) / (2 * eps)
            a = analytic[name].reshape(-1)[idx]
            denom = max(abs(a), abs(numeric))
            err = abs(a - numeric) if denom < 1e-8 else abs(a - numeric) / denom
            group_worst = max(group_worst, err)
        if report is not None:
            report[name] = group_worst
        worst = max(worst, group_worst)
    return worst


# ---------------------------------------------------------------- serialization


def save_params(params: ScorerParams, path) -> None:
    """Binary layout: magic, version, hyperparameters, vocab, then little-endian f64 arrays."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIIII", FORMAT_VERSION, params.d, params.d_f, params.heads, params.max_tokens))
        f.write(struct.pack("<d", params.ln_epsilon))
        words = sorted(params.vocab, key=params.vocab.__getitem__)
        f.write(struct.pack("<I", len(words)))
        for w in words:
            raw = w.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
        for name in ARRAY_NAMES:
            f.write(np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes())


def _array_shapes(n_vocab, d, d_f, heads):
    d_h = d // heads
    return {
        "E": (n_vocab, d), "W_q": (heads, d, d_h), "W_k": (heads, d, d_h), "W_v": (heads, d, d_h),
        "W_m": (d, d), "W_1": (d, d_f), "b_1": (d_f,), "W_2": (d_f, d), "b_2": (d,),
        "g_1": (d,), "beta_1": (d,), "g_2": (d,), "beta_2": (d,), "W_o": (d,), "b_o": (),
    }


def load_params(path) -> ScorerParams:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a scorer parameter file")
    pos = len(MAGIC)
    version, d, d_f, heads, max_tokens = struct.unpack_from("<IIIII", data, pos)
    pos += 20
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    (ln_eps,) = struct.unpack_from("<d", data, pos)
    pos += 8
    (n_vocab,) = struct.unpack_from("<I", data, pos)
    pos += 4
    vocab = {}
    for i in range(n_vocab):
        (length,) = struct.unpack_from("<I", data, pos)
        pos += 4
        vocab[data[pos : pos + length].decode("utf-8")] = i
        pos += length
    arrays = {}
    for name, shape in _array_shapes(n_vocab, d, d_f, heads).items():
        count = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape).astype(float)
        pos += 8 * count
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")
    return ScorerParams(vocab=vocab, d=d, d_f=d_f, heads=heads, ln_epsilon=ln_eps, max_tokens=max_tokens, **arrays)
