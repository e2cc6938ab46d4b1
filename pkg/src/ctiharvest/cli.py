"""Single entry point orchestrating the whole pipeline as subcommands.

Every invocation writes one run manifest under the runs directory.  Exit
codes: 0 success, 2 usage, 3 configuration error, 4 missing input artifact,
1 anything else; failures also emit a machine-readable JSON error line on
stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
from pathlib import Path

from . import config as config_mod
from . import embeddings as embeddings_mod
from . import preprocess as preprocess_mod
from . import rank as rank_mod
from . import seeds as seeds_mod
from . import service as service_mod
from . import vocab as vocab_mod
from .classify import ClassifierError, ClassifierModel, load_examples
from .classify import train_model as train_classifier_model
from .crawl import CrawlConfigError, run_crawl
from .htmltext import extract_metadata, parse_html
from .store import DocumentStore, StoreError
from .urlnorm import utcnow_rfc3339

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING_INPUT = 4


class MissingInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # machine-readable usage errors, exit code 2
        print(json.dumps({"error": {"code": "usage", "message": message}}),
              file=sys.stderr)
        self.exit(EXIT_USAGE)


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"{what} not found: {path}")
    return path


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


# -- subcommand implementations -------------------------------------------------
# each returns (payload printed to stdout or None, inputs, outputs)


def cmd_train_classifier(args):
    examples_path = _require_file(args.examples, "examples")
    examples = load_examples(examples_path)
    if args.dry_run:
        return {"dry_run": True, "examples": len(examples)}, [str(examples_path)], []
    model = train_classifier_model(
        examples, seed=args.seed, epochs=args.epochs, lambda_reg=args.lambda_reg)
    model.save(args.out)
    return (
        {"examples": len(examples), "n_pos": model.n_pos, "n_neg": model.n_neg,
         "final_loss": model.epoch_losses[-1], "model": args.out},
        [str(examples_path)],
        [args.out],
    )


def cmd_seedfind(args):
    model_path = _require_file(args.model, "classifier model")
    corpus_path = _require_file(args.corpus, "search corpus")
    model = ClassifierModel.load(model_path)
    documents = []
    with open(corpus_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                documents.append((d["url"], d["text"]))
    backend = seeds_mod.LocalSearchIndex(documents)
    if args.dry_run:
        return ({"dry_run": True, "corpus_docs": len(documents)},
                [str(model_path), str(corpus_path)], [])
    found = seeds_mod.seed_find(
        args.query, model, backend,
        max_seeds=args.max_seeds, max_iters=args.max_iters,
        results_per_query=args.results_per_query)
    out, close = _open_out(args.out)
    try:
        for url in found:
            out.write(url + "\n")
    finally:
        if close:
            out.close()
    outputs = [args.out] if close else []
    return None if not close else {"seeds": len(found), "out": args.out}, \
        [str(model_path), str(corpus_path)], outputs


def cmd_crawl(args):
    config_path = _require_file(args.config, "crawl config")
    raw = config_mod.load_config_file(config_path)
    overrides = {
        "profile": args.profile,
        "seeds": args.seed_url or [],
        "max_pages": args.max_pages,
        "max_depth": args.max_depth,
        "politeness_ms": args.politeness_ms,
        "model_path": args.model_path,
        "socks_proxy": args.socks_proxy,
        "cookie_jar": args.cookie_jar,
        "user_agent": args.user_agent,
        "workers": args.workers,
    }
    overrides = {k: (str(v) if v is not None and not isinstance(v, list) else v)
                 for k, v in overrides.items()}
    config = config_mod.build_crawl_config(raw, base_dir=config_path.parent,
                                           overrides=overrides)
    if args.dry_run:
        return ({"dry_run": True, "profile": config.profile,
                 "seeds": len(config.seeds), "filters": len(config.filters),
                 "classifier": config.classifier is not None,
                 "fetches": 0},
                [str(config_path)], [])
    store = DocumentStore(args.store)
    report = run_crawl(config, store)
    return report.to_json(), [str(config_path)], [args.store]


def cmd_parse(args):
    store_path = _require_file(args.store, "document store")
    rules = []
    inputs = [str(store_path)]
    if args.config:
        config_path = _require_file(args.config, "crawl config")
        raw = config_mod.load_config_file(config_path)
        rules = [config_mod._parse_metadata_rule(v) for v in raw.get("metadata_rules", [])]
        inputs.append(str(config_path))
    store = DocumentStore(args.store)
    pending = [d.doc_id for d in store.iter_documents(status="fetched")]
    if args.dry_run:
        return {"dry_run": True, "pending": len(pending)}, inputs, []
    for doc_id in pending:
        record = store.get_document(doc_id)
        page = parse_html(record.raw_html, record.url)
        metadata = extract_metadata(record.raw_html, record.url, rules)
        store.mark_parsed(doc_id, page.text, page.title, metadata)
    return {"parsed": len(pending)}, inputs, [args.store]


def cmd_preprocess(args):
    posts_path = _require_file(args.posts, "posts dump")
    inputs = [str(posts_path)]
    comments_path = None
    if args.comments:
        comments_path = _require_file(args.comments, "comments dump")
        inputs.append(str(comments_path))
    posts = preprocess_mod.parse_dump(posts_path, comments_path)
    if args.tags_xml:
        tags_xml = _require_file(args.tags_xml, "tags dump")
        tags = preprocess_mod.parse_tags_xml(tags_xml)
        inputs.append(str(tags_xml))
    else:
        tags = preprocess_mod.collect_tags(posts)
    if args.dry_run:
        return {"dry_run": True, "posts": len(posts), "tags": len(tags)}, inputs, []

    sentences = [p.body_text.split() for p in posts if p.body_text]
    table = preprocess_mod.build_phrase_table(
        sentences, threshold=args.phrase_threshold, delta=args.phrase_delta)
    multiword_tags = [t for t in tags if " " in t or "_" in t]
    merged = [
        preprocess_mod.tokenize_mwe(s, table, forced_phrases=multiword_tags)
        for s in sentences
    ]
    n_lines = preprocess_mod.write_token_corpus(merged, args.out_corpus)
    outputs = [args.out_corpus]
    if args.out_phrases:
        table.save_tsv(args.out_phrases)
        outputs.append(args.out_phrases)
    if args.out_tags:
        with open(args.out_tags, "w", encoding="utf-8") as fh:
            for tag in tags:
                fh.write(vocab_mod.normalize_tag(tag) + "\n")
        outputs.append(args.out_tags)
    return ({"posts": len(posts), "sentences": n_lines,
             "phrases": len(table.scores), "tags": len(tags)},
            inputs, outputs)


def cmd_train_embeddings(args):
    corpus_path = _require_file(args.corpus, "token corpus")
    corpus = preprocess_mod.read_token_corpus(corpus_path)
    if args.dry_run:
        return {"dry_run": True, "sentences": len(corpus)}, [str(corpus_path)], []
    model = embeddings_mod.train_skipgram(
        corpus, dim=args.dim, window=args.window, min_count=args.min_count,
        negatives=args.negatives, epochs=args.epochs,
        learning_rate=args.learning_rate, subsample_t=args.subsample,
        seed=args.seed, workers=args.workers)
    model.save(args.out)
    outputs = [args.out]
    if args.text_out:
        model.save_text(args.text_out)
        outputs.append(args.text_out)
    return ({"terms": len(model), "dim": model.dim, "model": args.out},
            [str(corpus_path)], outputs)


def _read_tags(args) -> list:
    if args.tags:
        return [t.strip() for t in args.tags.split(",") if t.strip()]
    tags_path = _require_file(args.tags_file, "tags file")
    with open(tags_path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def cmd_build_vocab(args):
    if not args.tags and not args.tags_file:
        raise config_mod.ConfigError("one of --tags or --tags-file is required")
    model_path = _require_file(args.model, "embedding model")
    tags = _read_tags(args)
    model = embeddings_mod.EmbeddingModel.load(model_path)
    if args.dry_run:
        return {"dry_run": True, "tags": len(tags)}, [str(model_path)], []
    vocabulary = vocab_mod.build_vocabulary(tags, model, args.n, topic_name=args.topic)
    vocab_mod.save_vocabulary(vocabulary, args.out)
    return ({"topic": args.topic, "tags": len(tags), "terms": len(vocabulary),
             "vocab": args.out},
            [str(model_path)], [args.out])


def cmd_rank(args):
    vocab_path = _require_file(args.vocab, "topic vocabulary")
    model_path = _require_file(args.model, "embedding model")
    store_path = _require_file(args.store, "document store")
    vocabulary = vocab_mod.load_vocabulary(vocab_path)
    model = embeddings_mod.EmbeddingModel.load(model_path)
    store = DocumentStore(args.store)
    doc_ids = [d.doc_id for d in store.iter_documents()
               if d.status in ("parsed", "ranked")]
    inputs = [str(vocab_path), str(model_path), str(store_path)]
    if args.dry_run:
        return {"dry_run": True, "docs": len(doc_ids)}, inputs, []
    results = rank_mod.rank_corpus(store, doc_ids, vocabulary, model,
                                   persist=not args.no_persist)
    out, close = _open_out(args.out)
    try:
        rank_mod.results_to_jsonl(results, store, out)
    finally:
        if close:
            out.close()
    outputs = [args.store] + ([args.out] if close else [])
    return (None if not close else {"ranked": len(results), "out": args.out},
            inputs, outputs)


def _load_ranked(path) -> list:
    ranked = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                ranked.append(json.loads(line))
    return ranked


def cmd_select(args):
    ranked_path = _require_file(args.ranked, "ranked results")
    ranked = _load_ranked(ranked_path)
    if args.mode == "threshold":
        param = float(args.param)
        if not -1.0 <= param <= 1.0:
            raise config_mod.ConfigError("threshold must be in [-1, 1]")
        chosen = [d for d in ranked if d["r"] >= param]
    elif args.mode == "top_k":
        k = int(args.param)
        if k < 0:
            raise config_mod.ConfigError("k must be >= 0")
        chosen = sorted(ranked, key=lambda d: (-d["r"], d["doc_id"]))[:k]
    else:  # argparse choices guard this
        raise config_mod.ConfigError(f"unknown mode {args.mode}")
    if args.dry_run:
        return ({"dry_run": True, "candidates": len(ranked)},
                [str(ranked_path)], [])
    out, close = _open_out(args.out)
    try:
        for d in chosen:
            out.write(json.dumps(d, sort_keys=True) + "\n")
    finally:
        if close:
            out.close()
    return (None if not close else {"selected": len(chosen), "out": args.out},
            [str(ranked_path)], [args.out] if close else [])


def cmd_export_feedback(args):
    ranked_path = _require_file(args.ranked, "ranked results")
    store_path = _require_file(args.store, "document store")
    store = DocumentStore(args.store)
    ranked = _load_ranked(ranked_path)
    results = [rank_mod.RelevanceResult(doc_id=d["doc_id"], score=d["r"])
               for d in ranked]
    if args.dry_run:
        return ({"dry_run": True, "candidates": len(results)},
                [str(ranked_path), str(store_path)], [])
    with open(args.out, "w", encoding="utf-8") as fh:
        n = rank_mod.export_feedback(store, results, fh,
                                     top=args.top, bottom=args.bottom)
    return ({"examples": n, "out": args.out},
            [str(ranked_path), str(store_path)], [args.out])


def cmd_serve(args):
    store_path = _require_file(args.store, "document store")
    vocabulary = None
    inputs = [str(store_path)]
    if args.vocab:
        vocab_path = _require_file(args.vocab, "topic vocabulary")
        vocabulary = vocab_mod.load_vocabulary(vocab_path)
        inputs.append(str(vocab_path))
    listen = args.listen or os.environ.get("CTI_LISTEN") or "127.0.0.1:8080"
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise config_mod.ConfigError(f"--listen must be host:port, got {listen!r}")
    labels = None
    if args.labels:
        labels = [s.strip() for s in args.labels.split("|")]
    svc = service_mod.JudgmentService(
        DocumentStore(args.store), vocab=vocabulary, scale_labels=labels,
        ui_dir=args.ui_dir)
    if args.dry_run:
        return {"dry_run": True, "listen": listen}, inputs, []
    service_mod.serve_forever(svc, host, int(port))
    return {"listen": listen}, inputs, []


def cmd_export(args):
    store_path = _require_file(args.store, "document store")
    store = DocumentStore(args.store)
    if args.what == "documents" and args.format == "csv":
        raise config_mod.ConfigError("documents export supports jsonl only")
    if args.dry_run:
        return {"dry_run": True, "what": args.what}, [str(store_path)], []
    out, close = _open_out(args.out)
    try:
        if args.what == "documents":
            n = store.export_documents(out)
        else:
            n = store.export_judgments(out, fmt=args.format)
    finally:
        if close:
            out.close()
    return (None if not close else {"exported": n, "out": args.out},
            [str(store_path)], [args.out] if close else [])


def cmd_report(args):
    store_path = _require_file(args.store, "document store")
    if args.dry_run:
        return {"dry_run": True}, [str(store_path)], []
    from .report import write_report  # matplotlib import deferred

    written = write_report(DocumentStore(args.store), args.out)
    return ({"report": written}, [str(store_path)], sorted(written.values()))


# -- parser ---------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="ctiharvest", description=__doc__)
    parser.add_argument("--seed", type=int, default=1, help="global RNG seed")
    parser.add_argument("--runs-dir", default="runs", help="run manifest directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--dry-run", action="store_true",
                       help="validate inputs without executing")
        return p

    p = add("train-classifier", cmd_train_classifier,
            help="train the frontier-pruning page classifier")
    p.add_argument("--examples", required=True,
                   help="pos/*.txt+neg/*.txt directory or JSON-lines file")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lambda-reg", type=float, default=1e-4, dest="lambda_reg")

    p = add("seedfind", cmd_seedfind, help="discover crawl seeds from a query")
    p.add_argument("--query", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True,
                   help="JSON-lines {url, text} search corpus")
    p.add_argument("--max-seeds", type=int, default=21)
    p.add_argument("--max-iters", type=int, default=5)
    p.add_argument("--results-per-query", type=int, default=10)
    p.add_argument("--out", default=None)

    p = add("crawl", cmd_crawl, help="run a crawl described by a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--profile", default=None)
    p.add_argument("--seed-url", action="append", default=None)
    p.add_argument("--max-pages", type=int, default=None)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--politeness-ms", type=int, default=None)
    p.add_argument("--model-path", default=None)
    p.add_argument("--socks-proxy", default=None)
    p.add_argument("--cookie-jar", default=None)
    p.add_argument("--user-agent", default=None)
    p.add_argument("--workers", type=int, default=None)

    p = add("parse", cmd_parse, help="parse fetched documents in the store")
    p.add_argument("--store", required=True)
    p.add_argument("--config", default=None, help="config with metadata_rules")

    p = add("preprocess", cmd_preprocess,
            help="XML dumps -> normalized MWE token corpus")
    p.add_argument("--posts", required=True)
    p.add_argument("--comments", default=None)
    p.add_argument("--tags-xml", default=None,
                   help="optional Tags.xml; otherwise tags come from questions")
    p.add_argument("--out-corpus", required=True)
    p.add_argument("--out-phrases", default=None)
    p.add_argument("--out-tags", default=None)
    p.add_argument("--phrase-threshold", type=float, default=10.0)
    p.add_argument("--phrase-delta", type=float, default=5.0)

    p = add("train-embeddings", cmd_train_embeddings,
            help="train skip-gram embeddings on a token corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--text-out", default=None)
    p.add_argument("--dim", type=int, default=150)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--learning-rate", type=float, default=0.025)
    p.add_argument("--subsample", type=float, default=1e-3)
    p.add_argument("--workers", type=int, default=1)

    p = add("build-vocab", cmd_build_vocab,
            help="expand tags with nearest embedding terms")
    p.add_argument("--tags", default=None, help="comma-separated tag list")
    p.add_argument("--tags-file", default=None)
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--topic", default="topic")
    p.add_argument("--out", required=True)

    p = add("rank", cmd_rank, help="score stored documents against the topic")
    p.add_argument("--vocab", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--no-persist", action="store_true")

    p = add("select", cmd_select, help="threshold/top-k selection on ranked output")
    p.add_argument("--ranked", required=True)
    p.add_argument("--mode", required=True, choices=["threshold", "top_k"])
    p.add_argument("--param", required=True)
    p.add_argument("--out", default=None)

    p = add("export-feedback", cmd_export_feedback,
            help="emit top/bottom ranked docs as classifier training data")
    p.add_argument("--store", required=True)
    p.add_argument("--ranked", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--bottom", type=int, default=10)
    p.add_argument("--out", required=True)

    p = add("serve", cmd_serve, help="run the judgment service and web UI")
    p.add_argument("--store", required=True)
    p.add_argument("--vocab", default=None)
    p.add_argument("--listen", default=None, help="host:port (env CTI_LISTEN)")
    p.add_argument("--ui-dir", default=None)
    p.add_argument("--labels", default=None, help="4 scale labels, | separated")

    p = add("export", cmd_export, help="export documents or judgments")
    p.add_argument("--store", required=True)
    p.add_argument("--what", required=True, choices=["documents", "judgments"])
    p.add_argument("--format", default="jsonl", choices=["jsonl", "csv"])
    p.add_argument("--out", default=None)

    p = add("report", cmd_report, help="render figures + CSV for a store")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True, help="output directory")

    return parser


def _write_manifest(runs_dir, subcommand, args, started, inputs, outputs,
                    exit_status) -> None:
    try:
        runs = Path(runs_dir)
        runs.mkdir(parents=True, exist_ok=True)
        run_id = f"{started.replace(':', '').replace('-', '')}-{secrets.token_hex(4)}"
        snapshot = {k: v for k, v in vars(args).items()
                    if k not in ("fn",) and not callable(v)}
        manifest = {
            "run_id": run_id,
            "subcommand": subcommand,
            "config": snapshot,
            "started_at": started,
            "ended_at": utcnow_rfc3339(),
            "inputs": inputs,
            "outputs": outputs,
            "exit_status": exit_status,
        }
        with open(runs / f"{run_id}.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    except OSError as exc:  # manifest trouble must not mask the real outcome
        logger.warning("could not write run manifest: %s", exc)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    started = utcnow_rfc3339()
    inputs: list = []
    outputs: list = []
    try:
        payload, inputs, outputs = args.fn(args)
        if payload is not None:
            print(json.dumps(payload, indent=2, sort_keys=True))
        code = EXIT_OK
    except MissingInput as exc:
        print(json.dumps({"error": {"code": "missing_input", "message": str(exc)}}),
              file=sys.stderr)
        code = EXIT_MISSING_INPUT
    except (config_mod.ConfigError, CrawlConfigError, vocab_mod.VocabError) as exc:
        print(json.dumps({"error": {"code": "config", "message": str(exc)}}),
              file=sys.stderr)
        code = EXIT_CONFIG
    except FileNotFoundError as exc:
        print(json.dumps({"error": {"code": "missing_input", "message": str(exc)}}),
              file=sys.stderr)
        code = EXIT_MISSING_INPUT
    except (StoreError, ClassifierError, embeddings_mod.EmbeddingError,
            preprocess_mod.DumpError, rank_mod.RankError, Exception) as exc:
        if isinstance(exc, KeyboardInterrupt):
            raise
        logger.debug("runtime failure", exc_info=True)
        print(json.dumps({"error": {"code": "runtime", "message": str(exc)}}),
              file=sys.stderr)
        code = EXIT_RUNTIME
    _write_manifest(args.runs_dir, args.subcommand, args, started, inputs,
                    outputs, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
