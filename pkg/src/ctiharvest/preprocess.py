"""Corpus preproceessing for embedding training.

Parses Q&A XML data dumps (Stack Exchange schema), normalizes and
anonymizes the text, and merges salient multi-word expressions into single
tokens so terms like "exploit kits" get their own vector.
"""

from __future__ import annotations

import html as html_mod
import logging
import re
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

POST_KINDS = {"1": "question", "2": "answer"}


class DumpError(Exception):
    """Malformed or missing dump file."""


@dataclass
class CorpusPost:
    post_id: str
    kind: str  # question | answer | comment
    body_text: str
    tags: list = field(default_factory=list)


@dataclass
class PhraseTable:
    """Bigram collocations with scores above the retention threshold."""

    scores: dict = field(default_factory=dict)  # (a, b) -> score
    threshold: float = 10.0
    delta: float = 5.0

    def __contains__(self, pair) -> bool:
        return pair in self.scores

    def save_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for (a, b), score in sorted(self.scores.items()):
                fh.write(f"{a}\t{b}\t{score!r}\n")

    @classmethod
    def load_tsv(cls, path, threshold: float = 10.0, delta: float = 5.0) -> "PhraseTable":
        scores = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                a, b, score = line.split("\t")
                scores[(a, b)] = float(score)
        return cls(scores=scores, threshold=threshold, delta=delta)


# -- XML dump parsing --------------------------------------------------------


def _split_tags(raw: str) -> list[str]:
    """The Tags attribute packs tags as ``<a><b>`` (entity-decoded by the
    XML parser); pipe-separated variants are tolerated."""
    if not raw:
        return []
    tags = re.findall(r"<([^<>]+)>", raw)
    if not tags and raw.strip():
        tags = [t for t in re.split(r"[|]", raw.strip()) if t]
    return [t.strip().lower() for t in tags if t.strip()]


def _iter_rows(path: Path):
    try:
        for _, elem in ET.iterparse(str(path), events=("end",)):
            if elem.tag == "row":
                yield dict(elem.attrib)
                elem.clear()
    except ET.ParseError as exc:
        line, col = exc.position
        raise DumpError(f"{path}: malformed XML at line {line}, column {col}: {exc.msg}") from exc


def parse_dump(posts_xml, comments_xml=None) -> list[CorpusPost]:
    """One CorpusPost per usable row; rows of unknown PostTypeId are skipped
    and the skip count reported via logging."""
    posts_xml = Path(posts_xml)
    if not posts_xml.exists():
        raise DumpError(f"missing dump file: {posts_xml}")
    out: list[CorpusPost] = []
    skipped = 0
    for row in _iter_rows(posts_xml):
        kind = POST_KINDS.get(row.get("PostTypeId", ""))
        if kind is None:
            skipped += 1
            continue
        body = normalize(row.get("Body", ""))
        tags = _split_tags(row.get("Tags", "")) if kind == "question" else []
        out.append(CorpusPost(post_id=f"post-{row.get('Id', '?')}", kind=kind,
                              body_text=body, tags=tags))
    if comments_xml is not None:
        comments_xml = Path(comments_xml)
        if not comments_xml.exists():
            raise DumpError(f"missing dump file: {comments_xml}")
        for row in _iter_rows(comments_xml):
            body = normalize(row.get("Text", ""))
            out.append(CorpusPost(post_id=f"comment-{row.get('Id', '?')}",
                                  kind="comment", body_text=body))
    if skipped:
        logger.info("parse_dump: skipped %d rows of unknown PostTypeId", skipped)
    return out


def collect_tags(posts: list[CorpusPost]) -> list[str]:
    """Union of question tags, first-seen order."""
    seen = set()
    tags = []
    for post in posts:
        for tag in post.tags:
            if tag not in seen:
                seen.add(tag)
                tags.append(tag)
    return tags


def parse_tags_xml(tags_xml) -> list[str]:
    """Tag names from an optional Tags.xml dump (row attribute TagName)."""
    tags_xml = Path(tags_xml)
    if not tags_xml.exists():
        raise DumpError(f"missing dump file: {tags_xml}")
    tags = []
    seen = set()
    for row in _iter_rows(tags_xml):
        name = row.get("TagName", "").strip().lower()
        if name and name not in seen:
            seen.add(name)
            tags.append(name)
    return tags


# -- normalization -----------------------------------------------------------

_TAG_RE = re.compile(r"</?[a-zA-Z][^<>]*>|<!--.*?-->|<![^<>]*>", re.DOTALL)
_URL_RE = re.compile(r"\b(?:https?|ftp)://\S+|\bwww\.\S+")
_MENTION_RE = re.compile(r"@\w+")
_USERNUM_RE = re.compile(r"\buser\d+\b")
_BAD_CHAR_RE = re.compile(r"[^a-z0-9_\- ]")
_HYPHEN_RUN_RE = re.compile(r"-{2,}")
_EDGE_HYPHEN_RE = re.compile(r"(?<![a-z0-9])-|-(?![a-z0-9])")
_WS_RE = re.compile(r"\s+")


def normalize(text: str) -> str:
    """Case-fold, strip markup, anonymize, and remove symbols.

    URLs become ``_url_``; @-mentions and ``user12345``-style names become
    ``_user_``.  Punctuation is dropped except intra-word hyphens.  The
    output alphabet is lowercase letters, digits, hyphen, underscore, and
    space.  Idempotent.
    """
    text = _TAG_RE.sub(" ", text)
    text = html_mod.unescape(text)
    text = text.casefold()
    text = _URL_RE.sub(" _url_ ", text)
    text = _MENTION_RE.sub(" _user_ ", text)
    text = _USERNUM_RE.sub(" _user_ ", text)
    text = _WS_RE.sub(" ", text)
    text = _BAD_CHAR_RE.sub(" ", text)
    text = _HYPHEN_RUN_RE.sub(" ", text)
    text = _EDGE_HYPHEN_RE.sub(" ", text)
    return _WS_RE.sub(" ", text).strip()


# -- multi-word expressions ---------------------------------------------------


def build_phrase_table(corpus, threshold: float = 10.0, delta: float = 5.0) -> PhraseTable:
    """Score adjacent bigrams with the count-discount formula.

    score(a, b) = (count(ab) - delta) * V / (count(a) * count(b)) where V is
    the vocabulary size; only pairs scoring above ``threshold`` are kept.
    ``corpus`` is an iterable of token lists (sentences).
    """
    unigrams: Counter = Counter()
    bigrams: Counter = Counter()
    for sentence in corpus:
        unigrams.update(sentence)
        bigrams.update(zip(sentence, sentence[1:]))
    vocab_size = len(unigrams)
    scores = {}
    for (a, b), n_ab in bigrams.items():
        score = (n_ab - delta) * vocab_size / (unigrams[a] * unigrams[b])
        if score > threshold:
            scores[(a, b)] = score
    return PhraseTable(scores=scores, threshold=threshold, delta=delta)


def tokenize_mwe(text, table: PhraseTable | None = None, forced_phrases=()) -> list[str]:
    """Whitespace-tokenize and merge multi-word expressions.

    Greedy single left-to-right pass: at each position the longest matching
    forced phrase (multi-word user tags, always merged) wins, then a bigram
    from the phrase table; merged tokens are not re-merged within the pass.
    ``text`` may be a pre-tokenized list.
    """
    tokens = text.split() if isinstance(text, str) else list(text)
    forced: dict = {}
    for phrase in forced_phrases:
        words = tuple(phrase.replace("_", " ").split())
        if len(words) >= 2:
            forced.setdefault(words[0], []).append(words)
    for first in forced:
        forced[first].sort(key=len, reverse=True)

    out: list[str] = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        merged = False
        for words in forced.get(tok, ()):  # longest forced phrase first
            k = len(words)
            if i + k <= n and tuple(tokens[i:i + k]) == words:
                out.append("_".join(words))
                i += k
                merged = True
                break
        if merged:
            continue
        if table is not None and i + 1 < n and (tok, tokens[i + 1]) in table:
            out.append(f"{tok}_{tokens[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def write_token_corpus(sentences, path) -> int:
    """Plain-text token corpus: one sentence per line, space-separated."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for sentence in sentences:
            if sentence:
                fh.write(" ".join(sentence) + "\n")
                n += 1
    return n


def read_token_corpus(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh if line.strip()]
