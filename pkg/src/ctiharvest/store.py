"""Embedded document store for crawled pages, scores, and human judgments.

Backed by a single SQLite database file so the whole pipeline stays
hermetic: no external server, safe for concurrent crawl workers (WAL mode,
per-record last-write-wins) and concurrent readers from the judgment
service.  Raw HTML is stored zlib-compressed with the codec recorded per
record.
"""

from __future__ import annotations

import base64
import csv
import io
import json
import sqlite3
import threading
import zlib
from dataclasses import dataclass, field, asdict
from typing import Iterable, Iterator, Optional

from .urlnorm import MalformedURL, canonical_url, document_id, utcnow_rfc3339

SOURCE_CLASSES = ("clear", "social", "dark")
STATUSES = ("fetched", "parsed", "ranked")
_STATUS_ORDER = {s: i for i, s in enumerate(STATUSES)}
ORDERS = ("random", "relevance_desc", "fetched_at_desc")


class StoreError(Exception):
    """Non-retryable store failure (bad input, constraint violation)."""


class NotFound(StoreError):
    """Lookup for an id that is not in the store."""


@dataclass
class DocumentRecord:
    """One harvested page and its derived artifacts."""

    url: str
    source_class: str
    fetched_at: str
    raw_html: bytes = b""
    text: str = ""
    title: str = ""
    metadata: dict = field(default_factory=dict)
    classifier_score: Optional[float] = None
    relevance_score: Optional[float] = None
    status: str = "fetched"
    doc_id: str = ""

    def __post_init__(self):
        self.url = canonical_url(self.url)
        if self.source_class not in SOURCE_CLASSES:
            raise StoreError(f"bad source_class {self.source_class!r}")
        if self.status not in STATUSES:
            raise StoreError(f"bad status {self.status!r}")
        if self.relevance_score is not None and self.status != "ranked":
            raise StoreError("relevance_score present requires status=ranked")
        if not self.doc_id:
            self.doc_id = document_id(self.url, self.fetched_at)

    def to_json(self) -> dict:
        d = asdict(self)
        d["raw_html"] = base64.b64encode(self.raw_html).decode("ascii")
        return d

    @classmethod
    def from_json(cls, d: dict) -> "DocumentRecord":
        d = dict(d)
        d["raw_html"] = base64.b64decode(d.get("raw_html", ""))
        return cls(**d)


@dataclass
class JudgmentRecord:
    """One human relevance assessment on the 4-point scale."""

    doc_id: str
    judge_id: str
    grade: int
    judged_at: str = ""

    def __post_init__(self):
        if not isinstance(self.grade, int) or self.grade not in (0, 1, 2, 3):
            raise StoreError(f"grade must be in 0..3, got {self.grade!r}")
        if not self.judge_id:
            raise StoreError("judge_id must be non-empty")
        if not self.judged_at:
            self.judged_at = utcnow_rfc3339()


@dataclass
class QueryFilter:
    source_class: Optional[str] = None
    status: Optional[str] = None
    score_range: Optional[tuple] = None  # (lo, hi) on relevance_score, inclusive
    limit: int = 100
    order: str = "fetched_at_desc"


_SCHEMA = """
CREATE TABLE IF NOT EXISTS documents (
    doc_id TEXT PRIMARY KEY,
    url TEXT NOT NULL,
    source_class TEXT NOT NULL,
    fetched_at TEXT NOT NULL,
    raw_html BLOB NOT NULL,
    codec TEXT NOT NULL,
    text TEXT NOT NULL DEFAULT '',
    title TEXT NOT NULL DEFAULT '',
    metadata TEXT NOT NULL DEFAULT '{}',
    classifier_score REAL,
    relevance_score REAL,
    status TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_documents_status ON documents(status);
CREATE INDEX IF NOT EXISTS idx_documents_source ON documents(source_class);
CREATE TABLE IF NOT EXISTS judgments (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    doc_id TEXT NOT NULL,
    judge_id TEXT NOT NULL,
    grade INTEGER NOT NULL,
    judged_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_judgments_doc ON judgments(doc_id);
"""


class DocumentStore:
    """SQLite-backed store; one instance may be shared across threads."""

    def __init__(self, path: str):
        self.path = str(path)
        self._local = threading.local()
        with self._conn() as conn:
            conn.executescript(_SCHEMA)

    def _conn(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = sqlite3.connect(self.path, timeout=30.0)
            conn.execute("PRAGMA journal_mode=WAL")
            conn.execute("PRAGMA busy_timeout=30000")
            conn.row_factory = sqlite3.Row
            self._local.conn = conn
        return conn

    def close(self):
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            conn.close()
            self._local.conn = None

    # -- documents ---------------------------------------------------------

    def put_document(self, record: DocumentRecord) -> str:
        """Insert or update a record; idempotent for identical (url, fetched_at).

        An update never moves ``status`` backwards.
        """
        try:
            record.url = canonical_url(record.url)
        except MalformedURL as exc:
            raise StoreError(f"malformed URL: {exc}") from exc
        conn = self._conn()
        with conn:
            row = conn.execute(
                "SELECT status FROM documents WHERE doc_id=?", (record.doc_id,)
            ).fetchone()
            if row is not None and _STATUS_ORDER[record.status] < _STATUS_ORDER[row["status"]]:
                raise StoreError(
                    f"status may not regress {row['status']} -> {record.status}"
                )
            conn.execute(
                "INSERT OR REPLACE INTO documents "
                "(doc_id, url, source_class, fetched_at, raw_html, codec, text,"
                " title, metadata, classifier_score, relevance_score, status) "
                "VALUES (?,?,?,?,?,?,?,?,?,?,?,?)",
                (
                    record.doc_id,
                    record.url,
                    record.source_class,
                    record.fetched_at,
                    zlib.compress(record.raw_html),
                    "zlib",
                    record.text,
                    record.title,
                    json.dumps(record.metadata, sort_keys=True),
                    record.classifier_score,
                    record.relevance_score,
                    record.status,
                ),
            )
        return record.doc_id

    def get_document(self, doc_id: str) -> DocumentRecord:
        row = self._conn().execute(
            "SELECT * FROM documents WHERE doc_id=?", (doc_id,)
        ).fetchone()
        if row is None:
            raise NotFound(f"no document {doc_id}")
        return self._row_to_record(row)

    def has_document(self, doc_id: str) -> bool:
        row = self._conn().execute(
            "SELECT 1 FROM documents WHERE doc_id=?", (doc_id,)
        ).fetchone()
        return row is not None

    @staticmethod
    def _row_to_record(row: sqlite3.Row) -> DocumentRecord:
        raw = row["raw_html"]
        if row["codec"] == "zlib":
            raw = zlib.decompress(raw)
        return DocumentRecord(
            doc_id=row["doc_id"],
            url=row["url"],
            source_class=row["source_class"],
            fetched_at=row["fetched_at"],
            raw_html=raw,
            text=row["text"],
            title=row["title"],
            metadata=json.loads(row["metadata"]),
            classifier_score=row["classifier_score"],
            relevance_score=row["relevance_score"],
            status=row["status"],
        )

    def mark_parsed(self, doc_id: str, text: str, title: str, metadata: dict) -> None:
        conn = self._conn()
        with conn:
            row = conn.execute(
                "SELECT status FROM documents WHERE doc_id=?", (doc_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"no document {doc_id}")
            if row["status"] == "ranked":
                # parsing again must not regress a ranked doc
                conn.execute(
                    "UPDATE documents SET text=?, title=?, metadata=? WHERE doc_id=?",
                    (text, title, json.dumps(metadata, sort_keys=True), doc_id),
                )
            else:
                conn.execute(
                    "UPDATE documents SET text=?, title=?, metadata=?, status='parsed' "
                    "WHERE doc_id=?",
                    (text, title, json.dumps(metadata, sort_keys=True), doc_id),
                )

    def mark_ranked(self, doc_id: str, relevance_score: float) -> None:
        conn = self._conn()
        with conn:
            cur = conn.execute(
                "UPDATE documents SET relevance_score=?, status='ranked' WHERE doc_id=?",
                (float(relevance_score), doc_id),
            )
            if cur.rowcount == 0:
                raise NotFound(f"no document {doc_id}")

    def query_documents(self, flt: QueryFilter) -> list[DocumentRecord]:
        if flt.limit < 1:
            raise StoreError("limit must be >= 1")
        if flt.order not in ORDERS:
            raise StoreError(f"bad order {flt.order!r}")
        clauses, params = [], []
        if flt.source_class is not None:
            clauses.append("source_class=?")
            params.append(flt.source_class)
        if flt.status is not None:
            clauses.append("status=?")
            params.append(flt.status)
        if flt.score_range is not None:
            lo, hi = flt.score_range
            clauses.append("relevance_score IS NOT NULL AND relevance_score BETWEEN ? AND ?")
            params.extend([lo, hi])
        where = ("WHERE " + " AND ".join(clauses)) if clauses else ""
        order_sql = {
            "random": "ORDER BY RANDOM()",
            "relevance_desc": "ORDER BY relevance_score DESC",
            "fetched_at_desc": "ORDER BY fetched_at DESC, doc_id",
        }[flt.order]
        rows = self._conn().execute(
            f"SELECT * FROM documents {where} {order_sql} LIMIT ?",
            (*params, flt.limit),
        ).fetchall()
        return [self._row_to_record(r) for r in rows]

    def count_documents(self, status: Optional[str] = None) -> int:
        if status is None:
            row = self._conn().execute("SELECT COUNT(*) c FROM documents").fetchone()
        else:
            row = self._conn().execute(
                "SELECT COUNT(*) c FROM documents WHERE status=?", (status,)
            ).fetchone()
        return row["c"]

    def all_doc_ids(self) -> list[str]:
        rows = self._conn().execute("SELECT doc_id FROM documents ORDER BY doc_id").fetchall()
        return [r["doc_id"] for r in rows]

    # -- judgments ---------------------------------------------------------

    def put_judgment(self, j: JudgmentRecord) -> None:
        if not self.has_document(j.doc_id):
            raise NotFound(f"no document {j.doc_id}")
        conn = self._conn()
        with conn:
            conn.execute(
                "INSERT INTO judgments (doc_id, judge_id, grade, judged_at) VALUES (?,?,?,?)",
                (j.doc_id, j.judge_id, j.grade, j.judged_at),
            )

    def list_judgments(self, doc_id: Optional[str] = None) -> list[JudgmentRecord]:
        """Full append-only judgment log, in insertion order."""
        if doc_id is None:
            rows = self._conn().execute("SELECT * FROM judgments ORDER BY seq").fetchall()
        else:
            rows = self._conn().execute(
                "SELECT * FROM judgments WHERE doc_id=? ORDER BY seq", (doc_id,)
            ).fetchall()
        return [
            JudgmentRecord(r["doc_id"], r["judge_id"], r["grade"], r["judged_at"])
            for r in rows
        ]

    def latest_judgments(self) -> dict:
        """Latest-wins view keyed by (doc_id, judge_id)."""
        latest: dict = {}
        for j in self.list_judgments():
            latest[(j.doc_id, j.judge_id)] = j
        return latest

    def latest_grade_per_doc(self) -> dict:
        """Most recent judgment per document (across judges)."""
        grades: dict = {}
        for j in self.list_judgments():
            grades[j.doc_id] = j.grade
        return grades

    def unjudged_doc_ids(self) -> list[str]:
        rows = self._conn().execute(
            "SELECT doc_id FROM documents WHERE doc_id NOT IN "
            "(SELECT DISTINCT doc_id FROM judgments) ORDER BY doc_id"
        ).fetchall()
        return [r["doc_id"] for r in rows]

    # -- export ------------------------------------------------------------

    def export_documents(self, out: io.TextIOBase) -> int:
        """JSON-lines export, one document per line; returns the line count."""
        n = 0
        rows = self._conn().execute("SELECT * FROM documents ORDER BY doc_id").fetchall()
        for row in rows:
            rec = self._row_to_record(row)
            out.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
            n += 1
        return n

    def export_judgments(self, out: io.TextIOBase, fmt: str = "jsonl") -> int:
        n = 0
        if fmt == "jsonl":
            for j in self.list_judgments():
                out.write(json.dumps(asdict(j), sort_keys=True) + "\n")
                n += 1
        elif fmt == "csv":
            writer = csv.writer(out)
            writer.writerow(["doc_id", "judge_id", "grade", "judged_at"])
            for j in self.list_judgments():
                writer.writerow([j.doc_id, j.judge_id, j.grade, j.judged_at])
                n += 1
        else:
            raise StoreError(f"unknown export format {fmt!r}")
        return n

    def import_documents(self, lines: Iterable[str]) -> int:
        n = 0
        for line in lines:
            line = line.strip()
            if not line:
                continue
            self.put_document(DocumentRecord.from_json(json.loads(line)))
            n += 1
        return n

    def iter_documents(self, status: Optional[str] = None) -> Iterator[DocumentRecord]:
        if status is None:
            rows = self._conn().execute(
                "SELECT * FROM documents ORDER BY doc_id"
            ).fetchall()
        else:
            rows = self._conn().execute(
                "SELECT * FROM documents WHERE status=? ORDER BY doc_id", (status,)
            ).fetchall()
        for row in rows:
            yield self._row_to_record(row)
