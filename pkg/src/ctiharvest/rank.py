"""Content ranking: topic/post vectors, relevance score, selection, highlights.

The topic vector is the unweighted sum of the vocabulary terms' vectors.
A post vector sums the vectors of post token occurrences that appear in the
topic vocabulary, each weighted by its cosine similarity to the topic
vector, so on-topic terms dominate the post's direction.  The relevance
score is the cosine of the two; a post with no vocabulary terms scores 0 by
convention.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingModel, cosine
from .preprocess import normalize, tokenize_mwe
from .store import DocumentStore
from .vocab import TopicVocabulary

logger = logging.getLogger(__name__)


class RankError(Exception):
    pass


@dataclass
class RelevanceResult:
    doc_id: str
    score: float
    matched_terms: list = field(default_factory=list)  # (term, count)
    vocab_token_count: int = 0
    total_token_count: int = 0


@dataclass(frozen=True)
class HighlightSpan:
    start: int
    end: int
    term: str


def topic_vector(vocab: TopicVocabulary, model: EmbeddingModel) -> np.ndarray:
    """Sum of the vectors of all vocabulary terms known to the model.

    Terms missing from the model are skipped with a warning; a vocabulary
    with no in-model terms leaves the topic undefined.
    """
    total = np.zeros(model.dim, dtype=np.float64)
    found = 0
    for term in vocab.terms():
        vec = model.vector(term)
        if vec is None:
            logger.warning("vocabulary term %r not in embedding model", term)
            continue
        total += vec.astype(np.float64)
        found += 1
    if found == 0:
        raise RankError("no vocabulary term is present in the embedding model")
    return total


def post_vector(
    tokens: list[str],
    vocab: TopicVocabulary,
    model: EmbeddingModel,
    topic: np.ndarray,
) -> np.ndarray:
    """Cosine-to-topic weighted sum over in-vocabulary token occurrences."""
    if not np.any(topic):
        raise RankError("topic vector is zero; post weighting undefined")
    post = np.zeros(model.dim, dtype=np.float64)
    for token in tokens:
        if token not in vocab:
            continue
        vec = model.vector(token)
        if vec is None:
            continue
        vec = vec.astype(np.float64)
        post += cosine(vec, topic) * vec
    return post


def relevance(
    tokens: list[str],
    vocab: TopicVocabulary,
    model: EmbeddingModel,
    topic: np.ndarray | None = None,
    doc_id: str = "",
) -> RelevanceResult:
    """Relevance of one tokenized post: cosine(topic vector, post vector)."""
    if topic is None:
        topic = topic_vector(vocab, model)
    post = post_vector(tokens, vocab, model, topic)
    matched = Counter(
        tok for tok in tokens if tok in vocab and model.vector(tok) is not None
    )
    vocab_token_count = sum(matched.values())
    if vocab_token_count == 0 or not np.any(post):
        score = 0.0
    else:
        score = cosine(topic, post)
    return RelevanceResult(
        doc_id=doc_id,
        score=score,
        matched_terms=sorted(matched.items()),
        vocab_token_count=vocab_token_count,
        total_token_count=len(tokens),
    )


def doc_tokens(text: str, vocab: TopicVocabulary) -> list[str]:
    """Tokenize document text for ranking: normalize, then merge the
    vocabulary's multi-word terms so they match their merged token form."""
    return tokenize_mwe(normalize(text), forced_phrases=vocab.multiword_terms())


def rank_corpus(
    store: DocumentStore,
    doc_ids: list[str],
    vocab: TopicVocabulary,
    model: EmbeddingModel,
    persist: bool = True,
) -> list[RelevanceResult]:
    """Score the given documents, sorted by score descending (ties by doc_id).

    Scores are written back to the store (status becomes ranked) unless
    ``persist`` is disabled; missing documents are skipped and reported.
    """
    topic = topic_vector(vocab, model)
    results = []
    for doc_id in doc_ids:
        try:
            record = store.get_document(doc_id)
        except Exception:
            logger.warning("rank_corpus: missing document %s; skipped", doc_id)
            continue
        tokens = doc_tokens(record.text, vocab)
        results.append(relevance(tokens, vocab, model, topic=topic, doc_id=doc_id))
    results.sort(key=lambda r: (-r.score, r.doc_id))
    if persist:
        for res in results:
            store.mark_ranked(res.doc_id, res.score)
    return results


def select(results: list[RelevanceResult], mode: str, param) -> list[RelevanceResult]:
    """Threshold or top-k selection over ranked results."""
    if mode == "threshold":
        param = float(param)
        if not -1.0 <= param <= 1.0:
            raise RankError("threshold must be in [-1, 1]")
        return [r for r in results if r.score >= param]
    if mode == "top_k":
        k = int(param)
        if k < 0:
            raise RankError("k must be >= 0")
        ordered = sorted(results, key=lambda r: (-r.score, r.doc_id))
        return ordered[:k]
    raise RankError(f"unknown selection mode {mode!r}")


def export_feedback(
    store: DocumentStore,
    results: list[RelevanceResult],
    out,
    top: int = 10,
    bottom: int = 10,
) -> int:
    """Emit the best/worst ranked documents as labeled classifier examples
    (JSON-lines ``{url, text, label}``) to retrain the crawl model."""
    ordered = sorted(results, key=lambda r: (-r.score, r.doc_id))
    n = 0
    for res, label in [(r, "positive") for r in ordered[:top]] + [
        (r, "negative") for r in ordered[-bottom:] if bottom > 0
    ]:
        record = store.get_document(res.doc_id)
        if not record.text:
            continue
        out.write(json.dumps(
            {"url": record.url, "text": record.text, "label": label},
            sort_keys=True) + "\n")
        n += 1
    return n


def results_to_jsonl(results: list[RelevanceResult], store: DocumentStore, out) -> int:
    n = 0
    for res in results:
        record = store.get_document(res.doc_id)
        out.write(json.dumps({
            "doc_id": res.doc_id,
            "url": record.url,
            "r": res.score,
            "matched_terms": [{"term": t, "count": c} for t, c in res.matched_terms],
        }, sort_keys=True) + "\n")
        n += 1
    return n


# -- highlights ---------------------------------------------------------------


def highlight(doc_text: str, vocab: TopicVocabulary) -> list[HighlightSpan]:
    """Character spans of vocabulary-term occurrences in the original text.

    Whole-word, case-insensitive; multi-word (merged) terms match their
    space-separated surface form; overlaps resolve longest-match-wins.
    Spans are returned sorted by start and never overlap.
    """
    candidates: list[HighlightSpan] = []
    for term in vocab.terms():
        surface = term.replace("_", " ").strip()
        if not surface:
            continue
        pattern = r"(?<!\w)" + r"\s+".join(
            re.escape(w) for w in surface.split()
        ) + r"(?!\w)"
        for m in re.finditer(pattern, doc_text, re.IGNORECASE):
            candidates.append(HighlightSpan(m.start(), m.end(), term))
    chosen: list[HighlightSpan] = []
    for span in sorted(candidates, key=lambda s: (-(s.end - s.start), s.start, s.term)):
        if all(span.end <= c.start or span.start >= c.end for c in chosen):
            chosen.append(span)
    return sorted(chosen, key=lambda s: s.start)


def highlight_payload(record, vocab: TopicVocabulary) -> dict:
    spans = highlight(record.text, vocab)
    return {
        "doc_id": record.doc_id,
        "r": record.relevance_score,
        "text": record.text,
        "spans": [{"start": s.start, "end": s.end, "term": s.term} for s in spans],
    }
