"""Linear page-relevance classifier that prunes the crawl frontier.

Hashed TF-IDF features (signed hashing trick over 2^20 buckets) with a
linear SVM trained by Pegasos-style stochastic subgradient descent.  Models
are immutable after training and safe to share across crawl workers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

MAGIC = b"CTIM1"
N_BUCKETS = 2 ** 20


class ClassifierError(Exception):
    pass


@dataclass
class LabeledExample:
    url: str
    text: str
    label: str  # positive | negative

    def __post_init__(self):
        if self.label not in ("positive", "negative"):
            raise ClassifierError(f"bad label {self.label!r}")
        if not self.text.strip():
            raise ClassifierError("example text must be non-empty")

    @property
    def y(self) -> int:
        return 1 if self.label == "positive" else -1


_WORD_RE = re.compile(r"[a-z0-9_]+")


def tokenize_words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def _default_hash(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def featurize(
    text: str,
    idf: Optional[dict] = None,
    n_buckets: int = N_BUCKETS,
    hash_fn: Callable[[str], int] = _default_hash,
) -> dict:
    """Hashed, L2-normalized TF(-IDF) vector as a sparse bucket -> value map.

    Deterministic; empty text yields the zero vector.  The top hash bit
    decides the sign, the rest the bucket.
    """
    counts: dict = {}
    for token in tokenize_words(text):
        h = hash_fn(token)
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        bucket = (h & (2 ** 63 - 1)) % n_buckets
        counts[bucket] = counts.get(bucket, 0.0) + sign
    if idf is not None:
        counts = {b: v * idf.get(b, 1.0) for b, v in counts.items()}
    norm = math.sqrt(sum(v * v for v in counts.values()))
    if norm == 0.0:
        return {}
    return {b: v / norm for b, v in counts.items()}


@dataclass
class ClassifierModel:
    weights: np.ndarray  # dense (n_buckets,) float64
    bias: float
    idf: dict  # bucket -> idf weight
    threshold: float = 0.0
    trained_at: int = 0
    n_pos: int = 0
    n_neg: int = 0
    n_buckets: int = N_BUCKETS
    epoch_losses: list = field(default_factory=list)

    def score(self, text: str) -> float:
        vec = featurize(text, idf=self.idf, n_buckets=self.n_buckets)
        total = self.bias
        for bucket, value in vec.items():
            total += self.weights[bucket] * value
        return total

    def save(self, path) -> None:
        """Versioned little-endian binary: magic, bucket count, scalar header,
        then sparse (bucket, weight) pairs for weights and idf.

        The training wall-clock time is deliberately not serialized so that
        retraining on identical inputs and seed reproduces the file
        byte-for-byte.
        """
        nz = np.nonzero(self.weights)[0]
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", self.n_buckets))
            fh.write(struct.pack("<ddII", self.bias, self.threshold,
                                 self.n_pos, self.n_neg))
            fh.write(struct.pack("<Q", len(nz)))
            for bucket in nz:
                fh.write(struct.pack("<Id", int(bucket), float(self.weights[bucket])))
            fh.write(struct.pack("<Q", len(self.idf)))
            for bucket in sorted(self.idf):
                fh.write(struct.pack("<Id", int(bucket), float(self.idf[bucket])))

    @classmethod
    def load(cls, path) -> "ClassifierModel":
        with open(path, "rb") as fh:
            if fh.read(len(MAGIC)) != MAGIC:
                raise ClassifierError(f"{path}: not a classifier model file")
            (n_buckets,) = struct.unpack("<I", fh.read(4))
            bias, threshold, n_pos, n_neg = struct.unpack("<ddII", fh.read(24))
            trained_at = 0
            weights = np.zeros(n_buckets, dtype=np.float64)
            (n_weights,) = struct.unpack("<Q", fh.read(8))
            for _ in range(n_weights):
                bucket, value = struct.unpack("<Id", fh.read(12))
                weights[bucket] = value
            idf = {}
            (n_idf,) = struct.unpack("<Q", fh.read(8))
            for _ in range(n_idf):
                bucket, value = struct.unpack("<Id", fh.read(12))
                idf[bucket] = value
        return cls(weights=weights, bias=bias, idf=idf, threshold=threshold,
                   trained_at=trained_at, n_pos=n_pos, n_neg=n_neg,
                   n_buckets=n_buckets)


def classify(model: ClassifierModel, text: str) -> dict:
    """Pure scoring: {"score": w.x + b, "relevant": score >= threshold}."""
    score = model.score(text)
    return {"score": score, "relevant": score >= model.threshold}


DEFAULT_TRAIN = dict(lambda_reg=1e-4, epochs=20, seed=1, n_buckets=N_BUCKETS)


def train_model(examples: list[LabeledExample], **overrides) -> ClassifierModel:
    """Pegasos stochastic subgradient training of an L2-regularized hinge
    loss; seeded shuffling makes runs reproducible.  Requires at least one
    example of each label."""
    hyper = dict(DEFAULT_TRAIN)
    unknown = set(overrides) - set(hyper)
    if unknown:
        raise ClassifierError(f"unknown training options: {sorted(unknown)}")
    hyper.update(overrides)
    n_pos = sum(1 for e in examples if e.label == "positive")
    n_neg = len(examples) - n_pos
    if n_pos < 1 or n_neg < 1:
        raise ClassifierError("need at least one positive and one negative example")

    n_buckets = hyper["n_buckets"]
    # document frequencies over hashed buckets -> smoothed idf
    df: dict = {}
    for ex in examples:
        for bucket in featurize(ex.text, n_buckets=n_buckets):
            df[bucket] = df.get(bucket, 0) + 1
    n_docs = len(examples)
    idf = {b: math.log((1 + n_docs) / (1 + c)) + 1.0 for b, c in df.items()}

    vectors = [featurize(ex.text, idf=idf, n_buckets=n_buckets) for ex in examples]
    labels = [ex.y for ex in examples]

    lam = hyper["lambda_reg"]
    rng = np.random.default_rng(hyper["seed"])
    weights = np.zeros(n_buckets, dtype=np.float64)
    bias = 0.0
    step = 0
    epoch_losses = []
    for _epoch in range(hyper["epochs"]):
        for i in rng.permutation(len(examples)):
            step += 1
            eta = 1.0 / (lam * step)
            x, y = vectors[i], labels[i]
            margin = y * (sum(weights[b] * v for b, v in x.items()) + bias)
            weights *= (1.0 - eta * lam)
            # the bias is treated as the weight of a constant augmented
            # feature and regularized with everything else, which keeps it
            # bounded through the large early 1/(lambda*t) steps
            bias *= (1.0 - eta * lam)
            if margin < 1.0:
                for b, v in x.items():
                    weights[b] += eta * y * v
                bias += eta * y
        loss = _mean_loss(weights, bias, vectors, labels, lam)
        if not math.isfinite(loss):
            raise ClassifierError(f"training diverged: loss={loss} at epoch {_epoch}")
        epoch_losses.append(loss)

    return ClassifierModel(
        weights=weights, bias=bias, idf=idf, threshold=0.0,
        trained_at=int(time.time()), n_pos=n_pos, n_neg=n_neg,
        n_buckets=n_buckets, epoch_losses=epoch_losses,
    )


def _mean_loss(weights, bias, vectors, labels, lam) -> float:
    hinge = 0.0
    for x, y in zip(vectors, labels):
        score = sum(weights[b] * v for b, v in x.items()) + bias
        hinge += max(0.0, 1.0 - y * score)
    reg = 0.5 * lam * (float(np.dot(weights, weights)) + bias * bias)
    return float(reg + hinge / len(vectors))


# -- training data loaders -----------------------------------------------------


def load_examples_dir(path) -> list[LabeledExample]:
    """Directory layout ``pos/*.txt`` and ``neg/*.txt``."""
    path = Path(path)
    examples = []
    for sub, label in (("pos", "positive"), ("neg", "negative")):
        for txt in sorted((path / sub).glob("*.txt")):
            examples.append(LabeledExample(
                url=f"file://{txt}", text=txt.read_text(encoding="utf-8"), label=label
            ))
    if not examples:
        raise ClassifierError(f"no pos/*.txt or neg/*.txt examples under {path}")
    return examples


def load_examples_jsonl(path) -> list[LabeledExample]:
    """JSON-lines with fields url, text, label."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            examples.append(LabeledExample(url=d.get("url", ""), text=d["text"],
                                           label=d["label"]))
    if not examples:
        raise ClassifierError(f"no examples in {path}")
    return examples


def load_examples(path) -> list[LabeledExample]:
    path = Path(path)
    if path.is_dir():
        return load_examples_dir(path)
    return load_examples_jsonl(path)
