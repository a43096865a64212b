"""Collaborator recommendation: deterministic author aggregation, the local
chat-completions client for generative synthesis, and the keyword baseline."""

from __future__ import annotations

import math
import threading
import time
from collections import Counter
from dataclasses import dataclass

import httpx

from .corpus import CorpusStore, PublicationRecord
from .embedding import tokenize
from .index import ScoredDocument
from .rag import PromptPayload

TOPIC_TERM_LIMIT = 5
MIN_KEYWORD_TOKEN_LEN = 3


class LlmTransportError(Exception):
    """The generation endpoint could not be reached after retries."""


class LlmEndpointError(Exception):
    """The generation endpoint answered, but not with a usable completion."""

    def __init__(self, status: int, excerpt: str):
        super().__init__(f"generation endpoint returned HTTP {status}: {excerpt}")
        self.status = status
        self.excerpt = excerpt


class EmptyGenerationError(Exception):
    """The endpoint returned an empty completion."""


@dataclass(frozen=True)
class SupportingDoc:
    pmid: str
    score: float


@dataclass
class CollaboratorRecommendation:
    """A ranked author: summed retrieval evidence plus topic terms."""

    canonical_key: str
    display_name: str
    aggregate_score: float
    supporting: list[SupportingDoc]
    topic_terms: list[str]


def aggregate_collaborators(
    ranked: list[tuple[ScoredDocument, PublicationRecord]],
    max_authors: int,
) -> list[CollaboratorRecommendation]:
    """Rank authors by the sum of their retrieved documents' cosine scores.

    Only positive-score documents count as evidence. An author appearing
    several times in one document counts that document once. Sums use exact
    rounding (math.fsum), so permuting the input never changes the output;
    supporting documents are listed by (score descending, pmid ascending),
    the display name comes from the best supporting document, and authors
    tie-break by ascending canonical key. Topic terms are the up-to-5 most
    frequent keywords across the author's supporting documents (ties
    alphabetical).
    """
    if max_authors < 1:
        raise ValueError("max_authors must be positive")
    supporting: dict[str, list[SupportingDoc]] = {}
    spellings: dict[str, dict[str, str]] = {}  # key -> pmid -> display as published
    keywords: dict[str, Counter] = {}
    for sd, record in ranked:
        if sd.score <= 0.0:
            continue
        seen: set[str] = set()
        for author in record.authors:
            key = author.canonical_key
            if not key or key in seen:
                continue
            seen.add(key)
            supporting.setdefault(key, []).append(SupportingDoc(pmid=sd.pmid, score=sd.score))
            spellings.setdefault(key, {})[sd.pmid] = author.display_name
            keywords.setdefault(key, Counter()).update(record.keywords)
    recommendations = []
    for key, docs in supporting.items():
        docs = sorted(docs, key=lambda d: (-d.score, d.pmid))
        counts = keywords[key]
        terms = sorted(counts, key=lambda term: (-counts[term], term))[:TOPIC_TERM_LIMIT]
        recommendations.append(
            CollaboratorRecommendation(
                canonical_key=key,
                display_name=spellings[key][docs[0].pmid],
                aggregate_score=math.fsum(d.score for d in docs),
                supporting=docs,
                topic_terms=terms,
            )
        )
    recommendations.sort(key=lambda rec: (-rec.aggregate_score, rec.canonical_key))
    return recommendations[:max_authors]


def keyword_baseline(q: str, store: CorpusStore, k: int) -> list[ScoredDocument]:
    """Token-overlap retrieval baseline.

    Score = |distinct query tokens (lowercased, length >= 3) present in the
    document's title+abstract tokens| / |distinct query tokens|. Zero-score
    documents are never returned; ties break by ascending pmid.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    query_tokens = {t for t in tokenize(q) if len(t) >= MIN_KEYWORD_TOKEN_LEN}
    if not query_tokens:
        return []
    scored: list[tuple[float, str]] = []
    for record in store.all_records():
        doc_tokens = set(tokenize(f"{record.title}\n{record.abstract}"))
        hits = len(query_tokens & doc_tokens)
        if hits:
            scored.append((hits / len(query_tokens), record.pmid))
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [
        ScoredDocument(pmid=pmid, score=score, rank=rank)
        for rank, (score, pmid) in enumerate(scored[:k], start=1)
    ]


@dataclass(frozen=True)
class LlmConfig:
    endpoint_url: str = ""
    model: str = "llama3.2"
    timeout: float = 120.0
    temperature: float = 0.0
    max_concurrency: int = 2
    retry_backoff: float = 0.25

    @property
    def enabled(self) -> bool:
        return bool(self.endpoint_url)


@dataclass
class GenerationResult:
    raw_text: str
    model_id: str
    prompt_hash: str
    latency_seconds: float


class LlmClient:
    """Client for a local chat-completions server (the de-facto wire protocol).

    POST {endpoint}/v1/chat/completions with a single user message holding the
    rendered prompt, temperature 0 by default; the completion is read from
    choices[0].message.content and returned verbatim. In-flight generations
    are bounded to protect a small local model server.
    """

    MAX_ATTEMPTS = 3

    def __init__(self, cfg: LlmConfig, client: httpx.Client | None = None):
        if not cfg.enabled:
            raise ValueError("LlmConfig has no endpoint_url")
        self.cfg = cfg
        self._client = client or httpx.Client(timeout=cfg.timeout)
        self._slots = threading.BoundedSemaphore(max(1, cfg.max_concurrency))

    def generate(self, prompt: PromptPayload) -> GenerationResult:
        prompt_hash = prompt.prompt_hash
        payload = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt.rendered_prompt}],
            "temperature": self.cfg.temperature,
        }
        started = time.perf_counter()
        with self._slots:
            response = self._post_with_retries(payload)
        latency = time.perf_counter() - started
        if response.status_code != 200:
            raise LlmEndpointError(response.status_code, response.text[:200])
        try:
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LlmEndpointError(response.status_code, f"malformed completion body: {exc}") from exc
        if not content:
            raise EmptyGenerationError("endpoint returned an empty completion")
        return GenerationResult(
            raw_text=content,
            model_id=str(body.get("model", self.cfg.model)),
            prompt_hash=prompt_hash,
            latency_seconds=latency,
        )

    def _post_with_retries(self, payload: dict) -> httpx.Response:
        url = self.cfg.endpoint_url.rstrip("/") + "/v1/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.MAX_ATTEMPTS):
            if attempt:
                time.sleep(self.cfg.retry_backoff * 2 ** (attempt - 1))
            try:
                return self._client.post(url, json=payload)
            except httpx.TransportError as exc:
                last_error = exc
        raise LlmTransportError(f"generation endpoint failed after {self.MAX_ATTEMPTS} attempts: {last_error}")

    def probe(self, timeout: float = 2.0) -> bool:
        url = self.cfg.endpoint_url.rstrip("/") + "/v1/models"
        try:
            return self._client.get(url, timeout=timeout).status_code == 200
        except httpx.HTTPError:
            return False

    def close(self) -> None:
        self._client.close()


def generate(prompt: PromptPayload, cfg: LlmConfig, client: httpx.Client | None = None) -> GenerationResult:
    """One-shot convenience wrapper around LlmClient.generate."""
    llm = LlmClient(cfg, client=client)
    try:
        return llm.generate(prompt)
    finally:
        llm.close()
