"""The pipeline shared by the service and the CLI: query, ingest, eval, health.

Keeping one code path here is what guarantees that the CLI and the HTTP
service return identical results for identical state.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

from .config import AppConfig
from .corpus import CorpusStore, ParseRejection, PublicationRecord, parse_records
from .embedding import (
    DegenerateEmbeddingError,
    EmbedderTransportError,
    document_text,
    make_embedder,
)
from .index import ScoredDocument, VectorIndex
from .rag import build_prompt, load_template, template_hash
from .recommend import (
    CollaboratorRecommendation,
    EmptyGenerationError,
    GenerationResult,
    LlmClient,
    LlmEndpointError,
    LlmTransportError,
    aggregate_collaborators,
    keyword_baseline,
)

TIE_RULE_NOTE = "ties broken by ascending pmid; duplicate documents rank in pmid order"


class InvalidRequestError(Exception):
    """The request itself is malformed (bad k, empty query, bad pmid)."""


class NoIndexError(Exception):
    """No vector index exists yet; ingest a corpus first."""


class StageUnavailableError(Exception):
    """A pipeline stage's backend (embedder or llm) is unreachable."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage} unavailable: {message}")
        self.stage = stage


@dataclass
class QueryOutcome:
    query: str
    k: int
    documents: list[tuple[ScoredDocument, PublicationRecord]]
    collaborators: list[CollaboratorRecommendation]
    generation: GenerationResult | None
    prompt_hash: str | None
    template_hash: str
    timings: dict[str, float]
    total_seconds: float


@dataclass
class IngestOutcome:
    inserted: int
    replaced: int
    rejections: list[ParseRejection]
    embedded: int
    index_count: int
    revision: int


@dataclass
class EvalRow:
    pmid: str
    embedding_rank: int | None
    keyword_rank: int | None


@dataclass
class EvalOutcome:
    doc_count: int
    embedding_top1_rate: float
    keyword_top1_rate: float
    embedding_mrr: float
    keyword_mrr: float
    rows: list[EvalRow]
    note: str = TIE_RULE_NOTE


class RagEngine:
    """Owns the corpus store, index, and backend clients for one deployment.

    Single writer, many readers: ingest serializes under a lock and swaps in
    new state atomically; queries read the last committed snapshot.
    """

    def __init__(self, config: AppConfig, embedder=None, llm: LlmClient | None = None):
        self.config = config
        self.store = CorpusStore(config.corpus_dir)
        self.index: VectorIndex | None = None
        if config.index_path.exists():
            self.index = VectorIndex.load(config.index_path)
            if self.index.dim != config.embedder.dim:
                raise ValueError(
                    f"index dim {self.index.dim} does not match configured embedder dim {config.embedder.dim}"
                )
        self.embedder = embedder if embedder is not None else make_embedder(config.embedder)
        if llm is not None:
            self.llm: LlmClient | None = llm
        else:
            self.llm = LlmClient(config.llm) if config.llm.enabled else None
        self.template = load_template(config.template_path)
        self.template_hash = template_hash(self.template)
        self._write_lock = threading.Lock()

    def close(self) -> None:
        self.embedder.close()
        if self.llm is not None:
            self.llm.close()

    # ------------------------------------------------------------------ query

    def query(self, q: str, k: int | None = None, include_generation: bool = False) -> QueryOutcome:
        if k is None:
            k = self.config.k_default
        if not q.strip():
            raise InvalidRequestError("query must be nonempty")
        if not 1 <= k <= self.config.max_k:
            raise InvalidRequestError(f"k must be in 1..{self.config.max_k}")
        index = self.index
        if index is None:
            raise NoIndexError("no index loaded; run ingest first")
        timings: dict[str, float] = {}
        started = time.perf_counter()

        mark = time.perf_counter()
        try:
            query_vector = self.embedder.embed_texts([q])[0]
        except EmbedderTransportError as exc:
            raise StageUnavailableError("embedder", str(exc)) from exc
        except DegenerateEmbeddingError as exc:
            raise InvalidRequestError(f"query cannot be embedded: {exc}") from exc
        timings["embed_query"] = time.perf_counter() - mark

        mark = time.perf_counter()
        hits = index.top_k(query_vector, k)
        documents = []
        for hit in hits:
            record = self.store.get(hit.pmid)
            if record is None:
                raise RuntimeError(f"index entry {hit.pmid} has no corpus record")
            documents.append((hit, record))
        timings["retrieve"] = time.perf_counter() - mark

        mark = time.perf_counter()
        collaborators = aggregate_collaborators(documents, self.config.max_authors)
        timings["aggregate"] = time.perf_counter() - mark

        generation = None
        prompt_hash = None
        if include_generation:
            mark = time.perf_counter()
            payload = build_prompt(q, documents, self.config.prompt_budget, self.template)
            prompt_hash = payload.prompt_hash
            timings["build_prompt"] = time.perf_counter() - mark
            if self.llm is None:
                raise StageUnavailableError("llm", "generation requested but no LLM endpoint configured")
            mark = time.perf_counter()
            try:
                generation = self.llm.generate(payload)
            except (LlmTransportError, LlmEndpointError, EmptyGenerationError) as exc:
                raise StageUnavailableError("llm", str(exc)) from exc
            timings["generate"] = time.perf_counter() - mark

        return QueryOutcome(
            query=q,
            k=k,
            documents=documents,
            collaborators=collaborators,
            generation=generation,
            prompt_hash=prompt_hash,
            template_hash=self.template_hash,
            timings=timings,
            total_seconds=time.perf_counter() - started,
        )

    # ----------------------------------------------------------------- ingest

    def ingest(self, data: bytes, fmt: str = "jsonl") -> IngestOutcome:
        """Parse, upsert, embed what changed, and persist index + corpus.

        Embedding happens first so an unreachable embedder mutates nothing;
        the index file is replaced atomically, so a crash mid-write leaves
        the previous revision serving (a partial file never passes the
        checksum).
        """
        report = parse_records(data, fmt)
        merged: dict[str, PublicationRecord] = {r.pmid: r for r in report.records}
        with self._write_lock:
            index = self.index if self.index is not None else VectorIndex(self.config.embedder.dim)
            to_embed = [r for r in merged.values() if self._needs_embedding(r, index)]
            try:
                vectors = self.embedder.embed_texts([document_text(r) for r in to_embed])
            except EmbedderTransportError as exc:
                raise StageUnavailableError("embedder", str(exc)) from exc
            upsert = self.store.upsert(list(merged.values()))
            for record, vector in zip(to_embed, vectors):
                index.add(record.pmid, vector)
            if to_embed or not self.config.index_path.exists():
                index.save(self.config.index_path)
            self.index = index
        return IngestOutcome(
            inserted=upsert.inserted,
            replaced=upsert.replaced,
            rejections=report.rejections,
            embedded=len(to_embed),
            index_count=len(index),
            revision=upsert.revision,
        )

    def _needs_embedding(self, record: PublicationRecord, index: VectorIndex) -> bool:
        # Re-embed on new pmid, changed embedding text, or a vector missing
        # after an interrupted ingest (self-healing).
        if record.pmid not in index:
            return True
        existing = self.store.get(record.pmid)
        return existing is None or document_text(existing) != document_text(record)

    # ------------------------------------------------------------------- eval

    def evaluate(self) -> EvalOutcome:
        """Self-retrieval comparison: embedding retrieval vs keyword baseline."""
        index = self.index
        if index is None or len(index) == 0:
            raise NoIndexError("no index loaded; run ingest first")
        records = self.store.all_records()
        try:
            vectors = self.embedder.embed_texts([document_text(r) for r in records])
        except EmbedderTransportError as exc:
            raise StageUnavailableError("embedder", str(exc)) from exc
        rows = []
        for record, vector in zip(records, vectors):
            hits = index.top_k(vector, len(index))
            embedding_rank = next((h.rank for h in hits if h.pmid == record.pmid), None)
            kw_hits = keyword_baseline(document_text(record), self.store, max(len(records), 1))
            keyword_rank = next((h.rank for h in kw_hits if h.pmid == record.pmid), None)
            rows.append(EvalRow(pmid=record.pmid, embedding_rank=embedding_rank, keyword_rank=keyword_rank))
        n = len(rows)
        return EvalOutcome(
            doc_count=n,
            embedding_top1_rate=sum(1 for r in rows if r.embedding_rank == 1) / n,
            keyword_top1_rate=sum(1 for r in rows if r.keyword_rank == 1) / n,
            embedding_mrr=sum(1 / r.embedding_rank for r in rows if r.embedding_rank) / n,
            keyword_mrr=sum(1 / r.keyword_rank for r in rows if r.keyword_rank) / n,
            rows=rows,
        )

    # ----------------------------------------------------------------- health

    def health(self, probe_timeout: float = 2.0) -> dict:
        embedder_state = "up" if self.embedder.probe(timeout=probe_timeout) else "down"
        if self.llm is None:
            llm_state = "disabled"
        else:
            llm_state = "up" if self.llm.probe(timeout=probe_timeout) else "down"
        status = "ok" if embedder_state == "up" and llm_state != "down" else "degraded"
        return {
            "status": status,
            "corpus_revision": self.store.revision,
            "index_count": len(self.index) if self.index is not None else 0,
            "embedder": embedder_state,
            "llm": llm_state,
        }
