"""Transcript tokenisation, frequency-ranked vocabularies and word embeddings.

The tokenizer follows the familiar Keras conventions: lower-casing, a fixed
set of punctuation characters replaced by spaces, whitespace splitting,
1-based frequency ranks with 0 reserved for padding, unknown tokens skipped,
and pre-padding / pre-truncation to a common length.

Embeddings are trained with skip-gram and negative sampling (word2vec style)
in plain numpy.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyCorpus

FILTERS = '!"#$%&()*+,-./:;<=>?@[\\]^_`{|}~\t\n'
_TRANSLATE = str.maketrans({c: " " for c in FILTERS})


def tokenize(text: str) -> list[str]:
    return text.lower().translate(_TRANSLATE).split()


@dataclass
class Vocabulary:
    term_to_index: dict[str, int]
    frequencies: dict[str, int]
    index_to_term: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.index_to_term:
            self.index_to_term = [""] * (len(self.term_to_index) + 1)
            for term, idx in self.term_to_index.items():
                self.index_to_term[idx] = term

    def __len__(self) -> int:
        return len(self.term_to_index)

    @property
    def size(self) -> int:
        """Number of rows an embedding table needs (terms plus the padding row)."""
        return len(self.term_to_index) + 1

    def to_json(self) -> str:
        terms = self.index_to_term[1:]
        return json.dumps({"terms": terms, "frequencies": [self.frequencies[t] for t in terms]},
                          ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        doc = json.loads(text)
        terms = doc["terms"]
        return cls({t: i + 1 for i, t in enumerate(terms)}, dict(zip(terms, doc["frequencies"])))


def fit_vocabulary(corpus: list[str]) -> Vocabulary:
    """Rank terms by descending corpus frequency, ties by first occurrence."""
    if not corpus:
        raise EmptyCorpus("cannot fit a vocabulary on an empty corpus")
    counts: Counter = Counter()
    for text in corpus:
        counts.update(tokenize(text))
    if not counts:
        raise EmptyCorpus("corpus contains no tokens")
    # Counter preserves insertion (first occurrence) order; sort is stable
    ordered = sorted(counts, key=lambda t: -counts[t])
    return Vocabulary({t: i + 1 for i, t in enumerate(ordered)}, dict(counts))


@dataclass(frozen=True)
class TokenSequence:
    ids: np.ndarray
    original_length: int


def texts_to_sequences(vocab: Vocabulary, corpus: list[str],
                       max_len: int | None = None) -> list[TokenSequence]:
    """Map texts to id vectors, left-padded with 0 and left-truncated to ``max_len``.

    ``max_len`` defaults to the longest tokenised text in ``corpus`` (after
    unknown tokens are dropped).
    """
    raw = [[vocab.term_to_index[t] for t in tokenize(text) if t in vocab.term_to_index]
           for text in corpus]
    if max_len is None:
        max_len = max((len(r) for r in raw), default=0)
    max_len = max(int(max_len), 1)
    out = []
    for ids in raw:
        row = np.zeros(max_len, dtype=np.int64)
        kept = ids[-max_len:]
        if kept:
            row[max_len - len(kept):] = kept
        out.append(TokenSequence(row, len(ids)))
    return out


def sequences_to_matrix(seqs: list[TokenSequence]) -> np.ndarray:
    return np.stack([s.ids for s in seqs])


@dataclass(frozen=True)
class EmbeddingMatrix:
    rows: np.ndarray  # (V + 1, dim); row 0 is padding
    dim: int
    seed: int | None = None
    window: int | None = None
    negatives: int | None = None
    epochs: int | None = None
    loss_trace: tuple = ()

    def metadata(self) -> dict:
        return {"dim": self.dim, "seed": self.seed, "window": self.window,
                "negatives": self.negatives, "epochs": self.epochs}


def train_embeddings(corpus: list[str], vocab: Vocabulary | None = None, dim: int = 100,
                     window: int = 5, negatives: int = 5, epochs: int = 5, seed: int = 0,
                     lr_start: float = 0.025, lr_end: float = 1e-4) -> EmbeddingMatrix:
    """Skip-gram with negative sampling.

    Each centre word is updated against all of its context words in one step;
    the output vectors of the context word and ``negatives`` draws from the
    unigram^0.75 distribution are updated alongside. The learning rate decays
    linearly over all centre-word steps. Single-threaded and bit-reproducible
    for a fixed seed.
    """
    if not corpus:
        raise EmptyCorpus("cannot train embeddings on an empty corpus")
    if vocab is None:
        vocab = fit_vocabulary(corpus)
    docs = [np.array([vocab.term_to_index[t] for t in tokenize(text) if t in vocab.term_to_index],
                     dtype=np.int64) for text in corpus]
    n_tokens = sum(len(d) for d in docs)
    if n_tokens == 0:
        raise EmptyCorpus("no in-vocabulary tokens")

    rng = np.random.default_rng(seed)
    V = vocab.size
    w_in = (rng.random((V, dim)) - 0.5) / dim
    w_out = np.zeros((V, dim))

    freq = np.zeros(V)
    for term, idx in vocab.term_to_index.items():
        freq[idx] = vocab.frequencies.get(term, 0)
    noise = freq ** 0.75
    cdf = np.cumsum(noise / noise.sum())
    cdf[-1] = 1.0

    total_steps = max(epochs * n_tokens, 1)
    step = 0
    loss_trace = []
    offsets = np.array([o for o in range(-window, window + 1) if o != 0])
    for _ in range(epochs):
        loss_sum = 0.0
        n_pairs = 0
        for doc in docs:
            n = len(doc)
            for pos in range(n):
                lr = lr_start - (lr_start - lr_end) * step / total_steps
                step += 1
                ctx_pos = pos + offsets
                ctx = doc[ctx_pos[(ctx_pos >= 0) & (ctx_pos < n)]]
                if ctx.size == 0:
                    continue
                negs = np.searchsorted(cdf, rng.random((ctx.size, negatives)), side="right")
                targets = np.concatenate([ctx[:, None], negs], axis=1)
                labels = np.zeros(targets.shape)
                labels[:, 0] = 1.0
                h = w_in[doc[pos]]
                out_vecs = w_out[targets]
                scores = np.clip(out_vecs @ h, -30.0, 30.0)
                prob = 1.0 / (1.0 + np.exp(-scores))
                loss_sum -= np.log(np.where(labels > 0, prob, 1.0 - prob)).sum()
                n_pairs += ctx.size
                g = (labels - prob) * lr
                grad_h = np.einsum("ij,ijk->k", g, out_vecs)
                np.add.at(w_out, targets.ravel(), (g[..., None] * h).reshape(-1, dim))
                w_in[doc[pos]] += grad_h
        loss_trace.append(loss_sum / max(n_pairs, 1))

    rows = w_in.copy()
    rows[0] = 0.0
    return EmbeddingMatrix(rows, dim, seed, window, negatives, epochs, tuple(loss_trace))


def document_vectors(seqs: np.ndarray, emb: EmbeddingMatrix) -> np.ndarray:
    """Mean embedding over the non-padding positions of each id row."""
    seqs = np.asarray(seqs)
    mask = seqs != 0
    summed = emb.rows[seqs].sum(axis=1)
    counts = np.maximum(mask.sum(axis=1, keepdims=True), 1)
    return summed / counts


def save_embeddings(emb: EmbeddingMatrix, vocab: Vocabulary, path) -> None:
    meta = emb.metadata()
    lines = ["# " + ",".join(f"{k}={meta[k]}" for k in ("dim", "seed", "window", "negatives", "epochs"))]
    lines.append("index,term," + ",".join(f"e{i}" for i in range(emb.dim)))
    for idx, row in enumerate(emb.rows):
        term = vocab.index_to_term[idx] if idx else ""
        lines.append(f"{idx},{term}," + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_embeddings(path) -> EmbeddingMatrix:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = {}
    for item in lines[0].lstrip("# ").split(","):
        key, value = item.split("=")
        meta[key] = None if value == "None" else int(value)
    rows = np.array([[float(v) for v in line.split(",")[2:]] for line in lines[2:] if line])
    return EmbeddingMatrix(rows, meta["dim"], meta["seed"], meta["window"], meta["negatives"], meta["epochs"])
