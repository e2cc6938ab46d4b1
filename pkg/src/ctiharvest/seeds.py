"""Seed discovery: combine a search backend with the relevance classifier.

Starting from an operator query, pages returned by the backend that the
classifier accepts become crawl seeds; the next query is derived from the
top TF-IDF terms of the accepted pages, and the loop stops at the seed or
iteration budget or when it finds nothing new.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Protocol

from .classify import ClassifierModel, classify, tokenize_words

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchHit:
    url: str
    text: str


class SearchBackend(Protocol):
    def search(self, query: str, limit: int) -> list[SearchHit]: ...


class LocalSearchIndex:
    """TF-IDF index over an in-memory (url, text) corpus.

    Deterministic ranking (score desc, then url) so tests and fixtures can
    rely on stable results; doubles as the backend for local corpora.
    """

    def __init__(self, documents: list[tuple]):
        self.docs = [SearchHit(url, text) for url, text in documents]
        self._tfs = [Counter(tokenize_words(d.text)) for d in self.docs]
        df: Counter = Counter()
        for tf in self._tfs:
            df.update(tf.keys())
        n = max(1, len(self.docs))
        self._idf = {t: math.log((1 + n) / (1 + c)) + 1.0 for t, c in df.items()}

    def search(self, query: str, limit: int) -> list[SearchHit]:
        q_tokens = tokenize_words(query)
        if not q_tokens:
            return []
        scored = []
        for hit, tf in zip(self.docs, self._tfs):
            norm = math.sqrt(sum((c * self._idf.get(t, 1.0)) ** 2 for t, c in tf.items()))
            if norm == 0:
                continue
            score = sum(tf.get(t, 0) * self._idf.get(t, 1.0) for t in q_tokens) / norm
            if score > 0:
                scored.append((score, hit))
        scored.sort(key=lambda pair: (-pair[0], pair[1].url))
        return [hit for _, hit in scored[:limit]]


class FetchingSearchBackend:
    """Adapter over an external URL-list search function; fetches each hit to
    obtain its text.  ``search_fn(query, limit) -> list[url]`` is operator
    supplied, ``fetch_text(url) -> str`` extracts page text."""

    def __init__(self, search_fn, fetch_text):
        self.search_fn = search_fn
        self.fetch_text = fetch_text

    def search(self, query: str, limit: int) -> list[SearchHit]:
        hits = []
        for url in self.search_fn(query, limit):
            try:
                hits.append(SearchHit(url, self.fetch_text(url)))
            except Exception as exc:
                logger.warning("seed search: failed to fetch %s: %s", url, exc)
        return hits


def _top_terms(texts: list[str], k: int, exclude: set) -> list[str]:
    """Top-k terms by summed TF-IDF over the accepted pages."""
    tfs = [Counter(tokenize_words(t)) for t in texts]
    df: Counter = Counter()
    for tf in tfs:
        df.update(tf.keys())
    n = max(1, len(texts))
    weights: Counter = Counter()
    for tf in tfs:
        for term, count in tf.items():
            weights[term] += count * (math.log((1 + n) / (1 + df[term])) + 1.0)
    ranked = sorted(weights.items(), key=lambda tc: (-tc[1], tc[0]))
    return [t for t, _ in ranked if t not in exclude][:k]


def seed_find(
    query: str,
    model: ClassifierModel,
    backend: SearchBackend,
    max_seeds: int = 21,
    max_iters: int = 5,
    results_per_query: int = 10,
    query_terms: int = 3,
) -> list[str]:
    """Iteratively discover classifier-relevant seed URLs.

    Backend failures end the loop with the partial result and a warning;
    a backend with zero hits simply yields an empty list.
    """
    seeds: list[str] = []
    accepted_texts: list[str] = []
    used_queries = {query}
    current = query
    for _ in range(max_iters):
        try:
            hits = backend.search(current, results_per_query)
        except Exception as exc:
            logger.warning("seed search backend failed on %r: %s; returning "
                           "%d partial seeds", current, exc, len(seeds))
            break
        new = 0
        for hit in hits:
            if hit.url in seeds or len(seeds) >= max_seeds:
                continue
            if classify(model, hit.text)["relevant"]:
                seeds.append(hit.url)
                accepted_texts.append(hit.text)
                new += 1
        if len(seeds) >= max_seeds or new == 0:
            break
        terms = _top_terms(accepted_texts, query_terms, exclude=set())
        nxt = " ".join(terms)
        if not nxt or nxt in used_queries:
            break
        used_queries.add(nxt)
        current = nxt
    return seeds[:max_seeds]
