"""Topic vocabulary: user tags expanded with their nearest latent-space terms."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .embeddings import EmbeddingModel

logger = logging.getLogger(__name__)

FORMAT = "ctiharvest-vocab/1"


class VocabError(Exception):
    pass


@dataclass
class Provenance:
    kind: str  # "seed" | "neighbor"
    source_tag: str = ""
    rank: int = 0


@dataclass
class TopicVocabulary:
    topic_name: str
    seed_tags: list
    n_neighbors: int
    expanded_terms: dict = field(default_factory=dict)  # term -> Provenance

    def terms(self) -> list[str]:
        return list(self.expanded_terms)

    def multiword_terms(self) -> list[str]:
        return [t for t in self.expanded_terms if "_" in t]

    def __contains__(self, term: str) -> bool:
        return term in self.expanded_terms

    def __len__(self) -> int:
        return len(self.expanded_terms)


def normalize_tag(tag: str) -> str:
    """Multi-word tags are looked up as their merged token form."""
    return "_".join(tag.strip().lower().split())


def build_vocabulary(
    tags: list[str],
    model: EmbeddingModel,
    n_neighbors: int,
    topic_name: str = "topic",
) -> TopicVocabulary:
    """Tags plus each tag's ``n_neighbors`` nearest terms.

    Out-of-vocabulary tags stay in as seeds but contribute no neighbours;
    duplicate terms keep their earliest provenance.
    """
    if not tags:
        raise VocabError("no tags; topic vocabulary would be empty")
    if n_neighbors < 0:
        raise VocabError("n_neighbors must be >= 0")
    seed_tags = [normalize_tag(t) for t in tags if t.strip()]
    vocab = TopicVocabulary(topic_name=topic_name, seed_tags=seed_tags,
                            n_neighbors=n_neighbors)
    for tag in seed_tags:
        if tag not in vocab.expanded_terms:
            vocab.expanded_terms[tag] = Provenance(kind="seed")
    for tag in seed_tags:
        if tag not in model:
            logger.warning("tag %r not in embedding vocabulary; no neighbours", tag)
            continue
        if n_neighbors == 0:
            continue
        for rank, (term, _sim) in enumerate(model.nearest(tag, n_neighbors), start=1):
            if term not in vocab.expanded_terms:
                vocab.expanded_terms[term] = Provenance(
                    kind="neighbor", source_tag=tag, rank=rank
                )
    return vocab


def save_vocabulary(vocab: TopicVocabulary, path) -> None:
    terms = []
    for term in sorted(vocab.expanded_terms):
        prov = vocab.expanded_terms[term]
        entry = {"term": term, "provenance": prov.kind}
        if prov.kind == "neighbor":
            entry["source_tag"] = prov.source_tag
            entry["rank"] = prov.rank
        terms.append(entry)
    doc = {
        "format": FORMAT,
        "topic_name": vocab.topic_name,
        "seed_tags": vocab.seed_tags,
        "n": vocab.n_neighbors,
        "terms": terms,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_vocabulary(path) -> TopicVocabulary:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise VocabError(f"{path}: not a valid vocabulary file: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise VocabError(f"{path}: unsupported vocabulary format {doc.get('format')!r}")
    vocab = TopicVocabulary(
        topic_name=doc["topic_name"],
        seed_tags=list(doc["seed_tags"]),
        n_neighbors=int(doc["n"]),
    )
    for entry in doc["terms"]:
        if entry["provenance"] == "neighbor":
            prov = Provenance("neighbor", entry["source_tag"], int(entry["rank"]))
            if not 1 <= prov.rank <= vocab.n_neighbors:
                raise VocabError(f"{path}: neighbour rank {prov.rank} out of range")
        else:
            prov = Provenance("seed")
        vocab.expanded_terms[entry["term"]] = prov
    return vocab
