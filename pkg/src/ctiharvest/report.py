"""Harvest report: delimited per-document output plus summary figures.

Renders score and judgment distributions and the precision/threshold curve
to PNG files next to a CSV so a crawl's yield can be reviewed offline.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .store import DocumentStore  # noqa: E402

logger = logging.getLogger(__name__)


def write_report(store: DocumentStore, out_dir, threshold_steps: int = 41) -> dict:
    """Write report.csv and the summary figures into ``out_dir``.

    Returns a manifest of the files written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    latest_grade = store.latest_grade_per_doc()

    rows = []
    for record in store.iter_documents():
        rows.append({
            "doc_id": record.doc_id,
            "url": record.url,
            "source_class": record.source_class,
            "status": record.status,
            "classifier_score": record.classifier_score,
            "relevance_score": record.relevance_score,
            "latest_grade": latest_grade.get(record.doc_id),
        })

    csv_path = out_dir / "report.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "doc_id", "url", "source_class", "status",
            "classifier_score", "relevance_score", "latest_grade",
        ])
        writer.writeheader()
        writer.writerows(rows)

    written = {"csv": str(csv_path)}
    scores = [r["relevance_score"] for r in rows if r["relevance_score"] is not None]
    grades = [g for g in latest_grade.values()]

    fig, ax = plt.subplots(figsize=(6, 4))
    if scores:
        ax.hist(scores, bins=20, range=(-1.0, 1.0), color="#35618f", edgecolor="white")
    ax.set_xlabel("relevance score r")
    ax.set_ylabel("documents")
    ax.set_title("Relevance score distribution")
    fig.tight_layout()
    score_png = out_dir / "score_histogram.png"
    fig.savefig(score_png, dpi=120)
    plt.close(fig)
    written["score_histogram"] = str(score_png)

    fig, ax = plt.subplots(figsize=(6, 4))
    counts = [grades.count(g) for g in range(4)]
    ax.bar(range(4), counts, color="#8f5a35", tick_label=["0", "1", "2", "3"])
    ax.set_xlabel("judgment grade")
    ax.set_ylabel("documents (latest grade)")
    ax.set_title("Judgment grades")
    fig.tight_layout()
    grade_png = out_dir / "grade_histogram.png"
    fig.savefig(grade_png, dpi=120)
    plt.close(fig)
    written["grade_histogram"] = str(grade_png)

    fig, ax = plt.subplots(figsize=(6, 4))
    doc_score = {r["doc_id"]: r["relevance_score"] for r in rows}
    ts, precisions = [], []
    for i in range(threshold_steps):
        t = -1.0 + 2.0 * i / (threshold_steps - 1)
        above = [latest_grade[d] for d, s in doc_score.items()
                 if s is not None and s >= t and d in latest_grade]
        if above:
            ts.append(t)
            precisions.append(sum(1 for g in above if g >= 2) / len(above))
    if ts:
        ax.plot(ts, precisions, marker="o", markersize=3, color="#2f7d4f")
    ax.set_xlabel("selection threshold t")
    ax.set_ylabel("precision (grade >= 2)")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("Precision at threshold")
    fig.tight_layout()
    prec_png = out_dir / "precision_threshold.png"
    fig.savefig(prec_png, dpi=120)
    plt.close(fig)
    written["precision_threshold"] = str(prec_png)

    logger.info("report written to %s (%d documents)", out_dir, len(rows))
    return written
