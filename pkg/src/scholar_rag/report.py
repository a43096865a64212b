"""File reports for query and eval runs: delimited tables plus rendered figures.

Every report call writes CSV output and a matplotlib PNG side by side in the
target directory, returning the list of created paths. Rendering uses the Agg
backend so reports work headless.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .engine import EvalOutcome, QueryOutcome

_TITLE_CHARS = 48


def _short_title(title: str) -> str:
    if len(title) <= _TITLE_CHARS:
        return title
    return title[: _TITLE_CHARS - 1].rstrip() + "…"


def write_query_report(outcome: QueryOutcome, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        _write_retrieval_csv(outcome, out_dir / "retrieval.csv"),
        _write_collaborators_csv(outcome, out_dir / "collaborators.csv"),
        _plot_similarity(outcome, out_dir / "similarity.png"),
    ]
    return paths


def _write_retrieval_csv(outcome: QueryOutcome, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "pmid", "score", "title", "year", "authors"])
        for hit, record in outcome.documents:
            writer.writerow(
                [
                    hit.rank,
                    hit.pmid,
                    f"{hit.score:.7f}",
                    record.title,
                    "" if record.year is None else record.year,
                    "; ".join(a.display_name for a in record.authors),
                ]
            )
    return path


def _write_collaborators_csv(outcome: QueryOutcome, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["rank", "display_name", "canonical_key", "aggregate_score", "supporting_pmids", "topic_terms"]
        )
        for position, rec in enumerate(outcome.collaborators, start=1):
            writer.writerow(
                [
                    position,
                    rec.display_name,
                    rec.canonical_key,
                    f"{rec.aggregate_score:.7f}",
                    "; ".join(s.pmid for s in rec.supporting),
                    "; ".join(rec.topic_terms),
                ]
            )
    return path


def _plot_similarity(outcome: QueryOutcome, path: Path) -> Path:
    labels = [f"#{hit.rank} PMID {hit.pmid}\n{_short_title(record.title)}" for hit, record in outcome.documents]
    scores = [hit.score for hit, _ in outcome.documents]

    height = max(2.5, 0.9 * len(labels) + 1.2)
    fig, ax = plt.subplots(figsize=(9, height))
    positions = range(len(labels))
    ax.barh(positions, scores, color="#4878cf")
    ax.set_yticks(list(positions))
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("cosine similarity")
    ax.set_xlim(0.0, 1.05)
    ax.set_title(f"Top-{outcome.k} retrieval: {_short_title(outcome.query)}")
    for pos, score in zip(positions, scores):
        ax.text(min(score + 0.01, 1.04), pos, f"{score:.7f}", va="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_eval_report(outcome: EvalOutcome, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        _write_eval_rows_csv(outcome, out_dir / "eval_rows.csv"),
        _write_eval_summary_csv(outcome, out_dir / "eval_summary.csv"),
        _plot_eval(outcome, out_dir / "eval_comparison.png"),
    ]
    return paths


def _write_eval_rows_csv(outcome: EvalOutcome, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pmid", "embedding_rank", "keyword_rank"])
        for row in outcome.rows:
            writer.writerow(
                [
                    row.pmid,
                    "" if row.embedding_rank is None else row.embedding_rank,
                    "" if row.keyword_rank is None else row.keyword_rank,
                ]
            )
    return path


def _write_eval_summary_csv(outcome: EvalOutcome, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "embedding", "keyword"])
        writer.writerow(["top1_rate", f"{outcome.embedding_top1_rate:.7f}", f"{outcome.keyword_top1_rate:.7f}"])
        writer.writerow(["mrr", f"{outcome.embedding_mrr:.7f}", f"{outcome.keyword_mrr:.7f}"])
        writer.writerow(["doc_count", outcome.doc_count, outcome.doc_count])
    return path


def _plot_eval(outcome: EvalOutcome, path: Path) -> Path:
    metrics = ["top-1 rate", "MRR"]
    embedding_vals = [outcome.embedding_top1_rate, outcome.embedding_mrr]
    keyword_vals = [outcome.keyword_top1_rate, outcome.keyword_mrr]

    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.35
    xs = range(len(metrics))
    ax.bar([x - width / 2 for x in xs], embedding_vals, width, label="embedding", color="#4878cf")
    ax.bar([x + width / 2 for x in xs], keyword_vals, width, label="keyword", color="#d1894b")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(metrics)
    ax.set_ylim(0.0, 1.1)
    ax.set_ylabel("score")
    ax.set_title(f"Self-retrieval, {outcome.doc_count} documents")
    for x, val in zip(xs, embedding_vals):
        ax.text(x - width / 2, val + 0.02, f"{val:.3f}", ha="center", fontsize=8)
    for x, val in zip(xs, keyword_vals):
        ax.text(x + width / 2, val + 0.02, f"{val:.3f}", ha="center", fontsize=8)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
