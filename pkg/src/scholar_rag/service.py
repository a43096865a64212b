"""Local HTTP service exposing the retrieval pipeline.

Routes:
    POST /query          ranked documents, collaborator aggregates, optional generation
    POST /ingest         JSONL or PubMed XML payload (raw body or multipart "file" field)
    GET  /health         component status and corpus revision
    GET  /documents/{pmid}  stored record lookup
    /ui/*                static frontend assets when a UI directory is configured

The response models here are the single source of truth for output shape; the
CLI JSON mode serializes the same models so both surfaces emit identical
structures for identical state.
"""

from __future__ import annotations

import logging
import uuid

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .corpus import ParseFormatError, PublicationRecord, record_to_json
from .engine import (
    EvalOutcome,
    IngestOutcome,
    InvalidRequestError,
    NoIndexError,
    QueryOutcome,
    RagEngine,
    StageUnavailableError,
)

logger = logging.getLogger("scholar_rag.service")

PMID_MAX_LENGTH = 20


class QueryRequest(BaseModel):
    query: str
    k: int | None = Field(default=None, ge=1)
    include_generation: bool = False


class DocumentOut(BaseModel):
    pmid: str
    rank: int
    score: float
    title: str
    year: int | None = None
    authors: list[str]


class SupportingOut(BaseModel):
    pmid: str
    score: float


class CollaboratorOut(BaseModel):
    canonical_key: str
    display_name: str
    aggregate_score: float
    supporting: list[SupportingOut]
    topic_terms: list[str]


class GenerationOut(BaseModel):
    raw_text: str
    model_id: str
    prompt_hash: str
    latency_seconds: float


class QueryResponse(BaseModel):
    query: str
    k: int
    documents: list[DocumentOut]
    collaborators: list[CollaboratorOut]
    generation: GenerationOut | None = None
    prompt_hash: str | None = None
    template_hash: str
    timings: dict[str, float]
    total_seconds: float


class RejectionOut(BaseModel):
    position: int
    reason: str


class IngestResponse(BaseModel):
    inserted: int
    replaced: int
    embedded: int
    rejected: int
    rejections: list[RejectionOut]
    index_count: int
    revision: int


class EvalRowOut(BaseModel):
    pmid: str
    embedding_rank: int | None = None
    keyword_rank: int | None = None


class EvalResponse(BaseModel):
    doc_count: int
    embedding_top1_rate: float
    keyword_top1_rate: float
    embedding_mrr: float
    keyword_mrr: float
    note: str
    rows: list[EvalRowOut]


class HealthResponse(BaseModel):
    status: str
    corpus_revision: int
    index_count: int
    embedder: str
    llm: str


class RecordOut(BaseModel):
    pmid: str
    title: str
    abstract: str
    authors: list[str]
    affiliations: list[str]
    keywords: list[str]
    year: int | None = None


def query_response_from_outcome(outcome: QueryOutcome) -> QueryResponse:
    documents = [
        DocumentOut(
            pmid=hit.pmid,
            rank=hit.rank,
            score=hit.score,
            title=record.title,
            year=record.year,
            authors=[a.display_name for a in record.authors],
        )
        for hit, record in outcome.documents
    ]
    collaborators = [
        CollaboratorOut(
            canonical_key=c.canonical_key,
            display_name=c.display_name,
            aggregate_score=c.aggregate_score,
            supporting=[SupportingOut(pmid=s.pmid, score=s.score) for s in c.supporting],
            topic_terms=list(c.topic_terms),
        )
        for c in outcome.collaborators
    ]
    generation = None
    if outcome.generation is not None:
        generation = GenerationOut(
            raw_text=outcome.generation.raw_text,
            model_id=outcome.generation.model_id,
            prompt_hash=outcome.generation.prompt_hash,
            latency_seconds=outcome.generation.latency_seconds,
        )
    return QueryResponse(
        query=outcome.query,
        k=outcome.k,
        documents=documents,
        collaborators=collaborators,
        generation=generation,
        prompt_hash=outcome.prompt_hash,
        template_hash=outcome.template_hash,
        timings=outcome.timings,
        total_seconds=outcome.total_seconds,
    )


def ingest_response_from_outcome(outcome: IngestOutcome) -> IngestResponse:
    return IngestResponse(
        inserted=outcome.inserted,
        replaced=outcome.replaced,
        embedded=outcome.embedded,
        rejected=len(outcome.rejections),
        rejections=[RejectionOut(position=r.position, reason=r.reason) for r in outcome.rejections],
        index_count=outcome.index_count,
        revision=outcome.revision,
    )


def eval_response_from_outcome(outcome: EvalOutcome) -> EvalResponse:
    return EvalResponse(
        doc_count=outcome.doc_count,
        embedding_top1_rate=outcome.embedding_top1_rate,
        keyword_top1_rate=outcome.keyword_top1_rate,
        embedding_mrr=outcome.embedding_mrr,
        keyword_mrr=outcome.keyword_mrr,
        note=outcome.note,
        rows=[
            EvalRowOut(pmid=r.pmid, embedding_rank=r.embedding_rank, keyword_rank=r.keyword_rank)
            for r in outcome.rows
        ],
    )


def record_out(record: PublicationRecord) -> RecordOut:
    return RecordOut(**record_to_json(record))


def _stage_detail(stage: str, message: str) -> dict:
    return {"stage": stage, "message": message}


def create_app(engine: RagEngine) -> FastAPI:
    app = FastAPI(title="scholar-rag", docs_url=None, redoc_url=None)

    @app.exception_handler(Exception)
    async def _internal_error(request: Request, exc: Exception) -> JSONResponse:
        # Opaque id keeps stack details out of responses but findable in logs.
        error_id = uuid.uuid4().hex[:12]
        logger.exception("internal error %s on %s %s", error_id, request.method, request.url.path)
        return JSONResponse(status_code=500, content={"detail": {"error_id": error_id}})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError) -> JSONResponse:
        # Malformed bodies are invalid requests: keep a single 400 status for
        # every client-side mistake instead of FastAPI's default 422.
        detail = "; ".join(
            f"{'.'.join(str(part) for part in err.get('loc', ()))}: {err.get('msg', 'invalid')}"
            for err in exc.errors()[:5]
        )
        return JSONResponse(status_code=400, content={"detail": detail or "invalid request"})

    @app.post("/query", response_model=QueryResponse, response_model_exclude_none=True)
    def query(req: QueryRequest) -> QueryResponse:
        try:
            outcome = engine.query(req.query, req.k, req.include_generation)
        except InvalidRequestError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except NoIndexError as exc:
            raise HTTPException(status_code=503, detail=_stage_detail("index", str(exc))) from exc
        except StageUnavailableError as exc:
            raise HTTPException(status_code=503, detail=_stage_detail(exc.stage, str(exc))) from exc
        return query_response_from_outcome(outcome)

    @app.post("/ingest", response_model=IngestResponse)
    async def ingest(request: Request, format: str = "jsonl") -> IngestResponse:
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/"):
            form = await request.form()
            upload = form.get("file")
            if upload is None or isinstance(upload, str):
                raise HTTPException(status_code=400, detail="multipart body must carry a 'file' field")
            data = await upload.read()
        else:
            data = await request.body()
        if not data:
            raise HTTPException(status_code=400, detail="empty ingest payload")
        try:
            outcome = engine.ingest(data, format)
        except ParseFormatError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except StageUnavailableError as exc:
            raise HTTPException(status_code=503, detail=_stage_detail(exc.stage, str(exc))) from exc
        return ingest_response_from_outcome(outcome)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(**engine.health())

    @app.get("/documents/{pmid}", response_model=RecordOut, response_model_exclude_none=True)
    def get_document(pmid: str) -> RecordOut:
        if not pmid.isdigit() or len(pmid) > PMID_MAX_LENGTH:
            raise HTTPException(status_code=400, detail="pmid must be a string of digits")
        record = engine.store.get(pmid)
        if record is None:
            raise HTTPException(status_code=404, detail=f"no record for pmid {pmid}")
        return record_out(record)

    ui_dir = engine.config.ui_dir
    if ui_dir is not None and ui_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def run_server(engine: RagEngine) -> None:
    import uvicorn

    uvicorn.run(
        create_app(engine),
        host=engine.config.listen_host,
        port=engine.config.listen_port,
        log_level="info",
    )
