"""Dense embedding backends: HTTP inference client plus a deterministic test embedder.

Embeddings are plain 1-D float64 numpy arrays, L2-normalized at creation so
cosine similarity downstream reduces to a dot product.
"""

from __future__ import annotations

import hashlib
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import httpx
import numpy as np

from .corpus import PublicationRecord

DEFAULT_DIM = 768
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class DimensionMismatchError(Exception):
    """A vector's dimension does not match the configured/index dimension."""


class DegenerateEmbeddingError(Exception):
    """The embedding is unusable: zero norm, non-finite values, or no tokens."""


class EmbedderTransportError(Exception):
    """The embedding endpoint could not be reached or answered unusably."""


@dataclass(frozen=True)
class EmbedderConfig:
    backend: str = "deterministic-test"  # "http" or "deterministic-test"
    endpoint_url: str = ""
    dim: int = DEFAULT_DIM
    timeout: float = 30.0
    max_batch: int = 32
    max_concurrency: int = 4
    retry_backoff: float = 0.25

    def __post_init__(self) -> None:
        if self.backend not in ("http", "deterministic-test"):
            raise ValueError(f"unknown embedder backend {self.backend!r}")
        if self.backend == "http" and not self.endpoint_url:
            raise ValueError("http backend requires endpoint_url")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.max_batch < 1:
            raise ValueError("max_batch must be positive")


def unit_vector(values, dim: int | None = None) -> np.ndarray:
    """Validate and L2-normalize a vector; raises on zero/non-finite input."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {vec.shape}")
    if dim is not None and vec.shape[0] != dim:
        raise DimensionMismatchError(f"expected dim {dim}, got {vec.shape[0]}")
    if not np.all(np.isfinite(vec)):
        raise DegenerateEmbeddingError("vector contains non-finite values")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise DegenerateEmbeddingError("zero vector")
    return vec / norm


def document_text(record: PublicationRecord) -> str:
    """The text a document is embedded from: title, newline, abstract."""
    if not record.abstract:
        return record.title
    return f"{record.title}\n{record.abstract}"


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on non-alphanumerics (underscore excluded)."""
    return _TOKEN_RE.findall(text.lower())


def deterministic_test_embed(text: str, dim: int) -> np.ndarray:
    """Pure hashing embedder for offline tests; a fixed function of (text, dim).

    Lowercase-tokenizes on non-alphanumerics; each token is hashed with
    BLAKE2b (8-byte digest, read little-endian) and contributes +1 (even
    hash) or -1 (odd hash) at index hash mod dim. The sum is L2-normalized.
    """
    if dim < 8:
        raise ValueError("dim must be >= 8")
    tokens = tokenize(text)
    if not tokens:
        raise DegenerateEmbeddingError("text has no tokens")
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        h = int.from_bytes(digest, "little")
        vec[h % dim] += 1.0 if h % 2 == 0 else -1.0
    return unit_vector(vec)


class DeterministicEmbedder:
    """Embedder backend wrapping deterministic_test_embed; always reachable."""

    def __init__(self, cfg: EmbedderConfig):
        self.cfg = cfg

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        return [deterministic_test_embed(text, self.cfg.dim) for text in texts]

    def probe(self, timeout: float = 2.0) -> bool:
        return True

    def close(self) -> None:
        pass


class HttpEmbedder:
    """Client for a local embedding inference endpoint.

    Wire format: POST endpoint_url with {"inputs": [text, ...]}; the response
    is {"embeddings": [[float, ...], ...]} in input order, HTTP 200 required.
    Texts are sent in batches of at most max_batch, with at most
    max_concurrency requests in flight. Transport failures are retried up to
    3 times with exponential backoff; a dimension mismatch is never retried.
    """

    MAX_ATTEMPTS = 3

    def __init__(self, cfg: EmbedderConfig, client: httpx.Client | None = None):
        self.cfg = cfg
        self._client = client or httpx.Client(timeout=cfg.timeout)

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        if not texts:
            return []
        batches = [texts[i : i + self.cfg.max_batch] for i in range(0, len(texts), self.cfg.max_batch)]
        if len(batches) == 1:
            return self._embed_batch(batches[0])
        workers = max(1, min(self.cfg.max_concurrency, len(batches)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(self._embed_batch, batches))
        return [vec for batch in results for vec in batch]

    def _embed_batch(self, batch: list[str]) -> list[np.ndarray]:
        last_error: Exception | None = None
        for attempt in range(self.MAX_ATTEMPTS):
            if attempt:
                time.sleep(self.cfg.retry_backoff * 2 ** (attempt - 1))
            try:
                return self._request(batch)
            except (httpx.TransportError, EmbedderTransportError) as exc:
                last_error = exc
        raise EmbedderTransportError(f"embedding endpoint failed after {self.MAX_ATTEMPTS} attempts: {last_error}")

    def _request(self, batch: list[str]) -> list[np.ndarray]:
        response = self._client.post(self.cfg.endpoint_url, json={"inputs": batch})
        if response.status_code != 200:
            raise EmbedderTransportError(f"embedding endpoint returned HTTP {response.status_code}")
        try:
            rows = response.json()["embeddings"]
        except (ValueError, KeyError) as exc:
            raise EmbedderTransportError(f"embedding endpoint returned malformed body: {exc}") from exc
        if not isinstance(rows, list) or len(rows) != len(batch):
            raise EmbedderTransportError(
                f"embedding endpoint returned {len(rows) if isinstance(rows, list) else 'non-list'} "
                f"embeddings for {len(batch)} inputs"
            )
        vectors = []
        for row in rows:
            if len(row) != self.cfg.dim:
                raise DimensionMismatchError(f"expected dim {self.cfg.dim}, got {len(row)}")
            vectors.append(unit_vector(row, self.cfg.dim))
        return vectors

    def probe(self, timeout: float = 2.0) -> bool:
        try:
            response = self._client.post(self.cfg.endpoint_url, json={"inputs": ["ping"]}, timeout=timeout)
            return response.status_code == 200
        except httpx.HTTPError:
            return False

    def close(self) -> None:
        self._client.close()


def make_embedder(cfg: EmbedderConfig, client: httpx.Client | None = None):
    if cfg.backend == "http":
        return HttpEmbedder(cfg, client=client)
    return DeterministicEmbedder(cfg)


def embed_document(record: PublicationRecord, cfg: EmbedderConfig) -> np.ndarray:
    """Embed one record's document text; unit vector of dimension cfg.dim."""
    return embed_query(document_text(record), cfg)


def embed_query(q: str, cfg: EmbedderConfig) -> np.ndarray:
    """Embed raw query text under the same contract as documents."""
    embedder = make_embedder(cfg)
    try:
        return embedder.embed_texts([q])[0]
    finally:
        embedder.close()
