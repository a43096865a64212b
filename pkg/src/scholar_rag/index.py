"""Exact cosine top-K index over unit vectors, with checksummed binary persistence.

The search is a full scan: every stored vector is scored by dot product
against the (normalized) query, which on unit vectors is exactly cosine
similarity. Ordering is deterministic: score descending, then pmid ascending
(lexicographic) on ties.

File format, all little-endian: magic "SRVX", format version u16, dim u32,
count u64, then count x (u16 pmid byte length, pmid UTF-8, dim x float64),
and a trailing CRC-64 (XZ variant) of all preceding bytes. Any corruption
fails the load; no partial index is ever returned.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import DegenerateEmbeddingError, DimensionMismatchError, unit_vector
from .files import atomic_write

MAGIC = b"SRVX"
FORMAT_VERSION = 1
UNIT_NORM_TOL = 1e-6

_HEADER = struct.Struct("<4sHIQ")
_PMID_LEN = struct.Struct("<H")
_FOOTER = struct.Struct("<Q")

# CRC-64/XZ: reflected poly, init and xorout all-ones.
_CRC64_POLY = 0xC96C5795D7870F42
_CRC64_TABLE = []
for _byte in range(256):
    _crc = _byte
    for _ in range(8):
        _crc = (_crc >> 1) ^ _CRC64_POLY if _crc & 1 else _crc >> 1
    _CRC64_TABLE.append(_crc)


def crc64(data: bytes) -> int:
    crc = 0xFFFFFFFFFFFFFFFF
    table = _CRC64_TABLE
    for b in data:
        crc = table[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFFFFFFFFFF


class CorruptIndexError(Exception):
    """The index file failed validation; ``field`` names what failed."""

    def __init__(self, field: str, message: str):
        super().__init__(f"corrupt index ({field}): {message}")
        self.field = field


@dataclass(frozen=True)
class ScoredDocument:
    """One retrieval hit: cosine score in [-1, 1] and 1-based rank."""

    pmid: str
    score: float
    rank: int


def cosine_similarity(a, b) -> float:
    """Cosine of two same-dimension vectors, clamped to [-1, 1]."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise DimensionMismatchError(f"incompatible shapes {va.shape} and {vb.shape}")
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateEmbeddingError("cosine undefined for zero-norm input")
    return float(np.clip(np.dot(va, vb) / (norm_a * norm_b), -1.0, 1.0))


class VectorIndex:
    """pmid-keyed store of unit vectors answering exact top-K cosine queries."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._pmids: list[str] = []
        self._rows: list[np.ndarray] = []
        self._lookup: dict[str, int] = {}
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._pmids)

    def __contains__(self, pmid: str) -> bool:
        return pmid in self._lookup

    def entries(self) -> list[tuple[str, np.ndarray]]:
        return list(zip(self._pmids, self._rows))

    def add(self, pmid: str, v) -> None:
        """Insert or replace (same pmid keeps its position) a unit vector."""
        vec = np.asarray(v, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimensionMismatchError(f"expected dim {self.dim}, got shape {vec.shape}")
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"vector for pmid {pmid} is not unit-norm (norm={norm})")
        vec = vec.copy()
        pos = self._lookup.get(pmid)
        if pos is None:
            self._lookup[pmid] = len(self._pmids)
            self._pmids.append(pmid)
            self._rows.append(vec)
        else:
            self._rows[pos] = vec
        self._matrix = None

    def top_k(self, q, k: int) -> list[ScoredDocument]:
        """The min(k, N) highest-cosine entries; ties broken by ascending pmid."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self._pmids:
            return []
        q_unit = unit_vector(q, self.dim)
        if self._matrix is None:
            self._matrix = np.vstack(self._rows)
        # einsum, not BLAS gemv: gemv's blocked kernels can round identical
        # rows differently by position, which would corrupt the pmid tie rule.
        scores = np.clip(np.einsum("ij,j->i", self._matrix, q_unit), -1.0, 1.0)
        pmids = self._pmids
        order = sorted(range(len(pmids)), key=lambda i: (-scores[i], pmids[i]))[:k]
        return [
            ScoredDocument(pmid=pmids[i], score=float(scores[i]), rank=rank)
            for rank, i in enumerate(order, start=1)
        ]

    def save(self, path: str | Path) -> None:
        """Persist atomically; load(save(x)) is bit-identical to x."""
        parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, self.dim, len(self._pmids))]
        for pmid, row in zip(self._pmids, self._rows):
            encoded = pmid.encode("utf-8")
            parts.append(_PMID_LEN.pack(len(encoded)))
            parts.append(encoded)
            parts.append(row.astype("<f8", copy=False).tobytes())
        body = b"".join(parts)
        atomic_write(Path(path), body + _FOOTER.pack(crc64(body)))

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        data = Path(path).read_bytes()
        if len(data) < _HEADER.size + _FOOTER.size:
            raise CorruptIndexError("length", f"file is {len(data)} bytes, below minimum")
        magic, version, dim, count = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise CorruptIndexError("magic", f"expected {MAGIC!r}, found {magic!r}")
        if version != FORMAT_VERSION:
            raise CorruptIndexError("version", f"unsupported format version {version}")
        (stored_crc,) = _FOOTER.unpack_from(data, len(data) - _FOOTER.size)
        body = data[: -_FOOTER.size]
        actual_crc = crc64(body)
        if actual_crc != stored_crc:
            raise CorruptIndexError("checksum", f"CRC-64 {actual_crc:#018x} != stored {stored_crc:#018x}")
        index = cls(dim)
        offset = _HEADER.size
        row_bytes = dim * 8
        for _ in range(count):
            if offset + _PMID_LEN.size > len(body):
                raise CorruptIndexError("length", "entry table overruns file")
            (pmid_len,) = _PMID_LEN.unpack_from(body, offset)
            offset += _PMID_LEN.size
            if offset + pmid_len + row_bytes > len(body):
                raise CorruptIndexError("length", "entry table overruns file")
            pmid = body[offset : offset + pmid_len].decode("utf-8")
            offset += pmid_len
            row = np.frombuffer(body[offset : offset + row_bytes], dtype="<f8").astype(np.float64)
            offset += row_bytes
            if pmid in index._lookup:
                raise CorruptIndexError("length", f"duplicate pmid {pmid} in entry table")
            index._lookup[pmid] = len(index._pmids)
            index._pmids.append(pmid)
            index._rows.append(row)
        if offset != len(body):
            raise CorruptIndexError("length", f"{len(body) - offset} trailing bytes after entry table")
        return index
