"""Skip-gram word embeddings with negative sampling, trained from scratch.

Single-threaded training is fully seeded and bit-reproducible; optional
worker threads trade that for speed with lock-free (racy) updates on the
shared weight matrices, which is the conventional behaviour for this model
family.  Defaults: 150 dimensions, window 5, minimum term count 1.
"""

from __future__ import annotations

import logging
import struct
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MAGIC = b"CTIV1"


class EmbeddingError(Exception):
    pass


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def cosine(a, b) -> float:
    """Cosine similarity in [-1, 1]; zero vectors yield 0.0 by convention."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EmbeddingError(f"dimension mismatch {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def sgns_loss_and_grads(v_c, u_o, u_neg):
    """Negative log-likelihood of one (center, context, negatives) triple and
    its analytic gradients.

    L = -log s(u_o . v_c) - sum_k log s(-u_k . v_c)

    This is the per-pair objective the trainer descends; exposed separately
    so the gradients can be checked against finite differences.
    Returns (loss, d/dv_c, d/du_o, d/du_neg).
    """
    v_c = np.asarray(v_c, dtype=np.float64)
    u_o = np.asarray(u_o, dtype=np.float64)
    u_neg = np.atleast_2d(np.asarray(u_neg, dtype=np.float64))
    s_o = _sigmoid(np.dot(u_o, v_c))
    s_k = _sigmoid(u_neg @ v_c)
    loss = -np.log(s_o) - np.sum(np.log1p(-s_k))
    grad_v = -(1.0 - s_o) * u_o + u_neg.T @ s_k
    grad_uo = -(1.0 - s_o) * v_c
    grad_uneg = np.outer(s_k, v_c)
    return float(loss), grad_v, grad_uo, grad_uneg


@dataclass
class EmbeddingModel:
    """Term -> distributional vector table with nearest-neighbour queries."""

    terms: list
    input_vectors: np.ndarray  # (V, d) float32
    counts: Optional[np.ndarray] = None
    output_vectors: Optional[np.ndarray] = None  # training only
    hyper: dict = field(default_factory=dict)
    vocabulary: dict = field(init=False)

    def __post_init__(self):
        self.vocabulary = {t: i for i, t in enumerate(self.terms)}
        if not np.all(np.isfinite(self.input_vectors)):
            raise EmbeddingError("non-finite entries in embedding matrix")

    @property
    def dim(self) -> int:
        return int(self.input_vectors.shape[1])

    def __contains__(self, term: str) -> bool:
        return term in self.vocabulary

    def __len__(self) -> int:
        return len(self.terms)

    def vector(self, term: str) -> Optional[np.ndarray]:
        """Input vector for an in-vocabulary term; None otherwise (never a
        silent zero vector)."""
        idx = self.vocabulary.get(term)
        if idx is None:
            return None
        return self.input_vectors[idx]

    def _norms(self) -> np.ndarray:
        norms = getattr(self, "_norm_cache", None)
        if norms is None:
            norms = np.linalg.norm(self.input_vectors.astype(np.float64), axis=1)
            self._norm_cache = norms
        return norms

    def nearest(self, term_or_vector, n: int):
        """The n most similar terms by cosine, descending; ties broken by
        lexicographic term order.  Querying by term excludes the term itself;
        an out-of-vocabulary term yields None."""
        if n < 1:
            raise EmbeddingError("n must be >= 1")
        exclude = None
        if isinstance(term_or_vector, str):
            if term_or_vector not in self.vocabulary:
                return None
            exclude = self.vocabulary[term_or_vector]
            query = self.input_vectors[exclude].astype(np.float64)
        else:
            query = np.asarray(term_or_vector, dtype=np.float64)
        qn = np.linalg.norm(query)
        norms = self._norms()
        with np.errstate(divide="ignore", invalid="ignore"):
            sims = (self.input_vectors.astype(np.float64) @ query)
            denom = norms * qn
            sims = np.where(denom > 0, sims / np.where(denom == 0, 1, denom), 0.0)
        order = sorted(
            (i for i in range(len(self.terms)) if i != exclude),
            key=lambda i: (-sims[i], self.terms[i]),
        )
        return [(self.terms[i], float(sims[i])) for i in order[:n]]

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        """Versioned binary: magic, u32 dim, u32 vocab size, then per term a
        length-prefixed UTF-8 string and dim little-endian float32 values."""
        vecs = np.ascontiguousarray(self.input_vectors, dtype="<f4")
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", self.dim, len(self.terms)))
            for i, term in enumerate(self.terms):
                raw = term.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)))
                fh.write(raw)
                fh.write(vecs[i].tobytes())

    @classmethod
    def load(cls, path) -> "EmbeddingModel":
        with open(path, "rb") as fh:
            magic = fh.read(len(MAGIC))
            if magic != MAGIC:
                raise EmbeddingError(f"{path}: not an embedding model file")
            dim, size = struct.unpack("<II", fh.read(8))
            terms = []
            vecs = np.empty((size, dim), dtype=np.float32)
            for i in range(size):
                (tlen,) = struct.unpack("<I", fh.read(4))
                terms.append(fh.read(tlen).decode("utf-8"))
                buf = fh.read(4 * dim)
                if len(buf) != 4 * dim:
                    raise EmbeddingError(f"{path}: truncated model file")
                vecs[i] = np.frombuffer(buf, dtype="<f4")
        return cls(terms=terms, input_vectors=vecs)

    def save_text(self, path) -> None:
        """Plain-text word-vector format: one ``term v1 .. vd`` per line."""
        with open(path, "w", encoding="utf-8") as fh:
            for i, term in enumerate(self.terms):
                values = " ".join(repr(float(x)) for x in self.input_vectors[i])
                fh.write(f"{term} {values}\n")

    @classmethod
    def from_vectors(cls, mapping: dict) -> "EmbeddingModel":
        """Hand-set model, mainly for fixtures and toy oracles."""
        terms = list(mapping)
        dim = len(next(iter(mapping.values())))
        vecs = np.array([mapping[t] for t in terms], dtype=np.float32).reshape(len(terms), dim)
        return cls(terms=terms, input_vectors=vecs)


# -- training ------------------------------------------------------------------

DEFAULT_HYPER = dict(
    dim=150,
    window=5,
    min_count=1,
    negatives=5,
    epochs=5,
    learning_rate=0.025,
    min_learning_rate=1e-4,
    subsample_t=1e-3,
    seed=1,
    workers=1,
)


class _NegativeSampler:
    """Unigram^(3/4) sampler over the vocabulary."""

    def __init__(self, counts: np.ndarray):
        weights = counts.astype(np.float64) ** 0.75
        self.cumulative = np.cumsum(weights)
        self.total = self.cumulative[-1]

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return np.searchsorted(self.cumulative, rng.random(k) * self.total)


def train_skipgram(corpus: Sequence[Sequence[str]], **overrides) -> EmbeddingModel:
    """Train skip-gram embeddings with negative sampling.

    The window is sampled uniformly in [1, window] per position, frequent
    terms are subsampled with discard probability 1 - sqrt(t/f), negatives
    come from the unigram^0.75 distribution, and the learning rate decays
    linearly over the planned number of training words.
    """
    hyper = dict(DEFAULT_HYPER)
    unknown = set(overrides) - set(hyper)
    if unknown:
        raise EmbeddingError(f"unknown hyperparameters: {sorted(unknown)}")
    hyper.update(overrides)
    if hyper["dim"] <= 0:
        raise EmbeddingError("dim must be positive")
    if hyper["window"] < 1:
        raise EmbeddingError("window must be >= 1")

    sentences = [list(s) for s in corpus if s]
    if not sentences:
        raise EmbeddingError("empty corpus")

    counter: Counter = Counter()
    for sent in sentences:
        counter.update(sent)
    vocab_items = sorted(
        ((t, c) for t, c in counter.items() if c >= hyper["min_count"]),
        key=lambda tc: (-tc[1], tc[0]),
    )
    if not vocab_items:
        raise EmbeddingError("no terms reach min_count")
    terms = [t for t, _ in vocab_items]
    counts = np.array([c for _, c in vocab_items], dtype=np.int64)
    vocab = {t: i for i, t in enumerate(terms)}

    dim = hyper["dim"]
    rng = np.random.default_rng(hyper["seed"])
    input_vectors = ((rng.random((len(terms), dim)) - 0.5) / dim).astype(np.float32)
    output_vectors = np.zeros((len(terms), dim), dtype=np.float32)

    total_tokens = int(counts.sum())
    t = hyper["subsample_t"]
    freqs = counts / total_tokens
    if t > 0:
        keep_prob = np.minimum(1.0, np.sqrt(t / freqs))
    else:
        keep_prob = np.ones(len(terms))

    sampler = _NegativeSampler(counts)
    in_vocab_per_sentence = [
        np.array([vocab[tok] for tok in sent if tok in vocab], dtype=np.int64)
        for sent in sentences
    ]
    planned_words = max(1, sum(len(ix) for ix in in_vocab_per_sentence) * hyper["epochs"])

    progress = {"words": 0}
    progress_lock = threading.Lock()

    def train_sentences(indices, worker_rng):
        window = hyper["window"]
        k_neg = hyper["negatives"]
        lr0 = hyper["learning_rate"]
        lr_min = hyper["min_learning_rate"]
        for sent_idx in indices:
            idxs = in_vocab_per_sentence[sent_idx]
            if len(idxs) == 0:
                continue
            with progress_lock:
                progress["words"] += len(idxs)
                done = progress["words"]
            alpha = max(lr_min, lr0 * (1.0 - done / planned_words))
            if t > 0:
                mask = worker_rng.random(len(idxs)) < keep_prob[idxs]
                kept = idxs[mask]
            else:
                kept = idxs
            n = len(kept)
            for i in range(n):
                c = kept[i]
                b = int(worker_rng.integers(1, window + 1))
                ctx = np.concatenate([kept[max(0, i - b):i], kept[i + 1:i + 1 + b]])
                if len(ctx) == 0:
                    continue
                negs = sampler.sample(worker_rng, len(ctx) * k_neg).reshape(len(ctx), k_neg)
                # a drawn negative equal to its positive target carries no signal
                collisions = negs == ctx[:, None]
                targets = np.concatenate([ctx[:, None], negs], axis=1).ravel()
                labels = np.zeros((len(ctx), 1 + k_neg), dtype=np.float32)
                labels[:, 0] = 1.0
                weights = np.ones_like(labels)
                weights[:, 1:][collisions] = 0.0

                v = input_vectors[c]
                u = output_vectors[targets]
                s = _sigmoid(u @ v)
                g = (labels.ravel() - s) * weights.ravel() * alpha
                grad_v = g @ u
                np.add.at(output_vectors, targets, g[:, None] * v)
                input_vectors[c] = v + grad_v

    order = np.arange(len(sentences))
    workers = max(1, int(hyper["workers"]))
    for epoch in range(hyper["epochs"]):
        if workers == 1:
            train_sentences(order, np.random.default_rng((hyper["seed"], epoch)))
        else:
            shards = np.array_split(order, workers)
            threads = [
                threading.Thread(
                    target=train_sentences,
                    args=(shard, np.random.default_rng((hyper["seed"], epoch, w))),
                )
                for w, shard in enumerate(shards)
            ]
            for th in threads:
                th.start()
            for th in threads:
                th.join()

    model = EmbeddingModel(
        terms=terms,
        input_vectors=input_vectors,
        counts=counts,
        output_vectors=output_vectors,
        hyper=hyper,
    )
    return model
