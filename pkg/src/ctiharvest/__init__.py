"""ctiharvest: two-stage cyber-threat-intelligence harvesting.

Stage one crawls the clear, social, and dark web with a classifier-pruned
or filter-scoped frontier; stage two ranks the harvested content against an
automatically expanded topic vocabulary in embedding space.  Human
judgments collected through the bundled service calibrate the selection
threshold.
"""

__version__ = "0.1.0"

from .classify import ClassifierModel, LabeledExample, classify, featurize, train_model
from .crawl import CrawlConfig, CrawlReport, run_crawl
from .embeddings import EmbeddingModel, cosine, train_skipgram
from .filters import LinkFilterRule, apply_filters
from .frontier import Frontier, FrontierEntry
from .htmltext import MetadataRule, ParsedPage, extract_links, extract_metadata, parse_html
from .preprocess import (
    CorpusPost,
    PhraseTable,
    build_phrase_table,
    normalize,
    parse_dump,
    tokenize_mwe,
)
from .rank import (
    HighlightSpan,
    RelevanceResult,
    highlight,
    post_vector,
    rank_corpus,
    relevance,
    select,
    topic_vector,
)
from .seeds import LocalSearchIndex, SearchHit, seed_find
from .store import DocumentRecord, DocumentStore, JudgmentRecord, QueryFilter
from .vocab import TopicVocabulary, build_vocabulary, load_vocabulary, save_vocabulary

__all__ = [
    "ClassifierModel", "LabeledExample", "classify", "featurize", "train_model",
    "CrawlConfig", "CrawlReport", "run_crawl",
    "EmbeddingModel", "cosine", "train_skipgram",
    "LinkFilterRule", "apply_filters",
    "Frontier", "FrontierEntry",
    "MetadataRule", "ParsedPage", "extract_links", "extract_metadata", "parse_html",
    "CorpusPost", "PhraseTable", "build_phrase_table", "normalize",
    "parse_dump", "tokenize_mwe",
    "HighlightSpan", "RelevanceResult", "highlight", "post_vector",
    "rank_corpus", "relevance", "select", "topic_vector",
    "LocalSearchIndex", "SearchHit", "seed_find",
    "DocumentRecord", "DocumentStore", "JudgmentRecord", "QueryFilter",
    "TopicVocabulary", "build_vocabulary", "load_vocabulary", "save_vocabulary",
]
