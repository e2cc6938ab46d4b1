"""HTTP API for human relevance judgments and highlight views.

Plain JSON over HTTP/1.1 on the stdlib threading server; the web UI is
served as static assets by the same process.  Handlers are stateless over
the concurrent-safe document store, so any number of judges can work at
once.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import random
import re
import statistics
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from .rank import doc_tokens, highlight
from .store import DocumentStore, JudgmentRecord, NotFound, QueryFilter
from .urlnorm import utcnow_rfc3339

logger = logging.getLogger(__name__)

DEFAULT_SCALE_LABELS = [
    "irrelevant",
    "on-topic, no usable intelligence",
    "relevant intelligence",
    "actionable intelligence",
]

_FALLBACK_PAGE = b"""<!doctype html>
<html><head><title>ctiharvest</title></head>
<body><h1>ctiharvest judgment service</h1>
<p>No UI assets configured (start with --ui-dir); the JSON API is live under /api/.</p>
</body></html>"""


class JudgmentService:
    """Route table and handlers; wrapped by the stdlib HTTP server."""

    def __init__(self, store: DocumentStore, vocab=None, scale_labels=None,
                 ui_dir=None, sample_seed=None):
        self.store = store
        self.vocab = vocab
        self.scale_labels = list(scale_labels or DEFAULT_SCALE_LABELS)
        if len(self.scale_labels) != 4:
            raise ValueError("exactly 4 scale labels required")
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self._rng = random.Random(sample_seed)

    # -- API handlers --------------------------------------------------------

    def sample(self, strategy: str) -> tuple:
        if strategy not in ("random", "unjudged_first"):
            return 400, _err("bad_strategy", f"unknown strategy {strategy!r}",
                             field="strategy")
        if self.store.count_documents() == 0:
            return 404, _err("empty_store", "no harvested documents to sample")
        doc = None
        if strategy == "unjudged_first":
            unjudged = self.store.unjudged_doc_ids()
            if unjudged:
                doc = self.store.get_document(self._rng.choice(unjudged))
        if doc is None:
            doc = self.store.query_documents(QueryFilter(limit=1, order="random"))[0]
        return 200, {
            "doc_id": doc.doc_id,
            "url": doc.url,
            "title": doc.title,
            "text": doc.text,
            "r": doc.relevance_score,
            "served_at": utcnow_rfc3339(),
        }

    def post_judgment(self, body: dict) -> tuple:
        doc_id = body.get("doc_id")
        judge_id = body.get("judge_id")
        grade = body.get("grade")
        if not isinstance(doc_id, str) or not doc_id:
            return 400, _err("missing_field", "doc_id is required", field="doc_id")
        if not isinstance(judge_id, str) or not judge_id:
            return 400, _err("missing_field", "judge_id is required", field="judge_id")
        if not isinstance(grade, int) or isinstance(grade, bool) or grade not in (0, 1, 2, 3):
            return 400, _err("invalid_grade", "grade must be an integer in 0..3",
                             field="grade")
        record = JudgmentRecord(doc_id=doc_id, judge_id=judge_id, grade=grade)
        try:
            self.store.put_judgment(record)
        except NotFound:
            return 404, _err("unknown_doc", f"no document {doc_id}", field="doc_id")
        return 200, {
            "doc_id": record.doc_id,
            "judge_id": record.judge_id,
            "grade": record.grade,
            "judged_at": record.judged_at,
        }

    def doc_highlight(self, doc_id: str) -> tuple:
        try:
            record = self.store.get_document(doc_id)
        except NotFound:
            return 404, _err("unknown_doc", f"no document {doc_id}")
        if record.status != "ranked":
            return 409, _err("not_ranked", "document has not been ranked yet")
        if self.vocab is None:
            return 503, _err("no_vocabulary", "service started without a topic vocabulary")
        spans = highlight(record.text, self.vocab)
        tokens = doc_tokens(record.text, self.vocab)
        counts: dict = {}
        for tok in tokens:
            if tok in self.vocab:
                counts[tok] = counts.get(tok, 0) + 1
        return 200, {
            "doc_id": record.doc_id,
            "text": record.text,
            "r": record.relevance_score,
            "spans": [{"start": s.start, "end": s.end, "term": s.term} for s in spans],
            "matched_terms": [
                {"term": t, "count": c} for t, c in sorted(counts.items())
            ],
        }

    def stats(self, threshold: float) -> tuple:
        judgments = self.store.list_judgments()
        histogram = [0, 0, 0, 0]
        for j in judgments:
            histogram[j.grade] += 1
        scores = [d.relevance_score for d in self.store.iter_documents(status="ranked")
                  if d.relevance_score is not None]
        deciles = None
        if len(scores) >= 2:
            deciles = statistics.quantiles(scores, n=10)
        elif len(scores) == 1:
            deciles = [scores[0]] * 9
        precision = None
        latest = self.store.latest_grade_per_doc()
        if latest:
            above = []
            for doc_id, grade in latest.items():
                try:
                    record = self.store.get_document(doc_id)
                except NotFound:
                    continue
                if record.relevance_score is not None and record.relevance_score >= threshold:
                    above.append(grade)
            if above:
                precision = sum(1 for g in above if g >= 2) / len(above)
        return 200, {
            "docs_total": self.store.count_documents(),
            "docs_ranked": self.store.count_documents(status="ranked"),
            "judgments_total": len(judgments),
            "grade_histogram": histogram,
            "score_deciles": deciles,
            "threshold": threshold,
            "precision_at_threshold": precision,
        }

    def config(self) -> tuple:
        return 200, {"scale_labels": self.scale_labels}

    # -- static assets ---------------------------------------------------------

    def static_asset(self, path: str):
        if self.ui_dir is None:
            if path in ("/", "/judge") or path.startswith("/view"):
                return 200, "text/html; charset=utf-8", _FALLBACK_PAGE
            return None
        rel = path.lstrip("/")
        if not rel or "." not in rel.rsplit("/", 1)[-1]:
            rel = "index.html"  # SPA routes fall through to the shell
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            return None
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        if ctype.startswith("text/") or ctype in ("application/javascript", "application/json"):
            ctype += "; charset=utf-8"
        return 200, ctype, target.read_bytes()


def _err(code: str, message: str, field: str | None = None) -> dict:
    error = {"code": code, "message": message}
    if field:
        error["field"] = field
    return {"error": error}


_HIGHLIGHT_RE = re.compile(r"^/api/docs/([0-9a-f]+)/highlight$")


class _Handler(BaseHTTPRequestHandler):
    service: JudgmentService  # injected by make_server

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("%s " + fmt, self.address_string(), *args)

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        parts = urlsplit(self.path)
        query = parse_qs(parts.query)
        try:
            if parts.path == "/api/sample":
                strategy = query.get("strategy", ["random"])[0]
                status, payload = self.service.sample(strategy)
            elif parts.path == "/api/stats":
                try:
                    threshold = float(query.get("t", ["0"])[0])
                except ValueError:
                    status, payload = 400, _err("bad_threshold", "t must be a number",
                                                field="t")
                else:
                    status, payload = self.service.stats(threshold)
            elif parts.path == "/api/config":
                status, payload = self.service.config()
            else:
                m = _HIGHLIGHT_RE.match(parts.path)
                if m:
                    status, payload = self.service.doc_highlight(m.group(1))
                elif parts.path.startswith("/api/"):
                    status, payload = 404, _err("no_route", f"no route {parts.path}")
                else:
                    asset = self.service.static_asset(parts.path)
                    if asset is None:
                        status, payload = 404, _err("not_found", "no such asset")
                    else:
                        code, ctype, body = asset
                        self.send_response(code)
                        self.send_header("Content-Type", ctype)
                        self.send_header("Content-Length", str(len(body)))
                        self.end_headers()
                        self.wfile.write(body)
                        return
        except Exception:
            logger.exception("request failed: %s", self.path)
            status, payload = 500, _err("internal", "internal error")
        self._send_json(status, payload)

    def do_POST(self):
        parts = urlsplit(self.path)
        if parts.path != "/api/judgments":
            self._send_json(404, _err("no_route", f"no route {parts.path}"))
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length else b""
            body = json.loads(raw.decode("utf-8")) if raw else {}
            if not isinstance(body, dict):
                raise ValueError("body must be a JSON object")
        except (ValueError, json.JSONDecodeError):
            self._send_json(400, _err("bad_json", "request body must be a JSON object"))
            return
        try:
            status, payload = self.service.post_judgment(body)
        except Exception:
            logger.exception("judgment failed")
            status, payload = 500, _err("internal", "internal error")
        self._send_json(status, payload)


def make_server(service: JudgmentService, host: str = "127.0.0.1",
                port: int = 8080) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(service: JudgmentService, host: str, port: int) -> None:
    server = make_server(service, host, port)
    logger.info("judgment service listening on http://%s:%d/", host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def start_background(service: JudgmentService, host: str = "127.0.0.1",
                     port: int = 0) -> tuple:
    """Start the server on a daemon thread; returns (server, base_url)."""
    server = make_server(service, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    actual_host, actual_port = server.server_address[:2]
    return server, f"http://{actual_host}:{actual_port}"
