"""Built-in invariant suite behind the `selftest` CLI subcommand.

Runs entirely in memory on a synthetic 10-document corpus with the
deterministic embedder: no network, no state mutation, byte-identical
output on repeated runs. Optionally validates an on-disk index file.
"""

from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import AuthorRef, PublicationRecord
from .embedding import deterministic_test_embed, document_text
from .index import CorruptIndexError, ScoredDocument, VectorIndex, cosine_similarity
from .rag import build_prompt
from .recommend import aggregate_collaborators

CHECK_DIM = 32


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status} {self.name}: {self.detail}"


def _fixture_records() -> list[PublicationRecord]:
    rows = [
        ("1001", "Glioma segmentation with convolutional networks", "Voxel-level tumor masks from multimodal MRI.",
         ["Chen, Wei", "Alvarez, Maria"]),
        ("1002", "Transformer models for radiology report generation", "Encoder-decoder summaries of chest films.",
         ["Alvarez, Maria", "Okafor, Chinwe"]),
        ("1003", "Survival prediction in lung cancer from CT radiomics", "Hazard models over texture features.",
         ["Okafor, Chinwe"]),
        ("1004", "Federated learning across hospital imaging archives", "Gradient sharing without data movement.",
         ["Chen, Wei", "Dubois, Claire"]),
        ("1005", "Histology slide classification at gigapixel scale", "Patch aggregation with attention pooling.",
         ["Dubois, Claire", "Alvarez, Maria"]),
        ("1006", "Self-supervised pretraining for ultrasound video", "Contrastive objectives on cine loops.",
         ["Nakamura, Ken"]),
        ("1007", "Diffusion models for MRI artifact removal", "Denoising priors for motion-corrupted scans.",
         ["Nakamura, Ken", "Chen, Wei"]),
        ("1008", "Graph networks for protein interaction screening", "Edge prediction on curated complexes.",
         ["Singh, Priya"]),
        # 1009 and 1010 are intentionally identical texts: bitwise-equal
        # vectors exercise the ascending-pmid tie rule end to end.
        ("1009", "Retinal vessel mapping with dilated convolutions", "Capillary-level segmentation in fundus images.",
         ["Singh, Priya", "Dubois, Claire"]),
        ("1010", "Retinal vessel mapping with dilated convolutions", "Capillary-level segmentation in fundus images.",
         ["Alvarez, Maria"]),
    ]
    return [
        PublicationRecord(
            pmid=pmid,
            title=title,
            abstract=abstract,
            authors=[AuthorRef.from_display(a) for a in authors],
            year=2020,
        )
        for pmid, title, abstract, authors in rows
    ]


def _check_embedder_determinism(records) -> CheckResult:
    name = "embedder-determinism"
    for record in records:
        text = document_text(record)
        a = deterministic_test_embed(text, CHECK_DIM)
        b = deterministic_test_embed(text, CHECK_DIM)
        if not np.array_equal(a, b):
            return CheckResult(name, False, f"re-embedding pmid {record.pmid} changed bits")
        norm = math.fsum(float(x) * float(x) for x in a)
        if abs(norm - 1.0) > 1e-12:
            return CheckResult(name, False, f"pmid {record.pmid} norm^2 deviates: {norm!r}")
    return CheckResult(name, True, f"{len(records)} documents, dim {CHECK_DIM}, unit norm within 1e-12")


def _check_cosine_oracle(vectors) -> CheckResult:
    name = "cosine-oracle"
    pairs = 0
    for i, a in enumerate(vectors):
        for b in vectors[i:]:
            expected = math.fsum(float(x) * float(y) for x, y in zip(a, b))
            expected = max(-1.0, min(1.0, expected))
            got = cosine_similarity(a, b)
            if abs(got - expected) > 1e-12:
                return CheckResult(name, False, f"pair {pairs} off by {abs(got - expected):.3e}")
            pairs += 1
    return CheckResult(name, True, f"{pairs} pairs within 1e-12 of the summation oracle")


def _check_topk_oracle(index: VectorIndex, vectors, pmids) -> CheckResult:
    name = "topk-oracle"
    probe = vectors[8]  # equal to vectors[9]: exercises the pmid tie rule
    scored = []
    for pmid, vec in zip(pmids, vectors):
        s = float(np.dot(vec, probe))
        scored.append((pmid, max(-1.0, min(1.0, s))))
    for k in (1, 3, len(pmids), len(pmids) + 5):
        expected = sorted(scored, key=lambda t: (-t[1], t[0]))[:k]
        got = index.top_k(probe, k)
        if [h.pmid for h in got] != [p for p, _ in expected]:
            return CheckResult(name, False, f"k={k} order diverges from the full-sort oracle")
        if [h.rank for h in got] != list(range(1, len(got) + 1)):
            return CheckResult(name, False, f"k={k} ranks are not 1..{len(got)}")
    if index.top_k(probe, 2)[0].pmid != "1009":
        return CheckResult(name, False, "tie between 1009 and 1010 not broken by ascending pmid")
    return CheckResult(name, True, "k in {1,3,N,N+5} matches the full-sort oracle, ties by pmid")


def _check_prompt_ordering(records, index: VectorIndex, vectors) -> CheckResult:
    name = "prompt-ordering"
    by_pmid = {r.pmid: r for r in records}
    hits = index.top_k(vectors[0], 3)
    ranked = [(h, by_pmid[h.pmid]) for h in hits]
    query = "synthetic selftest query"
    payload = build_prompt(query, ranked)
    rendered = payload.rendered_prompt
    last = -1
    for block in payload.context_blocks:
        if rendered.count(block.text) != 1:
            return CheckResult(name, False, f"context for pmid {block.pmid} appears {rendered.count(block.text)} times")
        pos = rendered.find(block.text)
        if pos <= last:
            return CheckResult(name, False, f"context for pmid {block.pmid} out of rank order")
        last = pos
    if rendered.count(query) != 1:
        return CheckResult(name, False, f"query appears {rendered.count(query)} times")
    if rendered.find(query) < last:
        return CheckResult(name, False, "query precedes the context section")
    return CheckResult(name, True, "each context exactly once, rank order kept, query follows contexts")


def _check_aggregation(records, index: VectorIndex, vectors) -> CheckResult:
    name = "aggregation-sums"
    by_pmid = {r.pmid: r for r in records}
    hits = index.top_k(vectors[0], len(records))
    documents = [(h, by_pmid[h.pmid]) for h in hits]
    forward = aggregate_collaborators(documents, max_authors=10)
    permuted_hits = list(reversed(documents))
    backward = aggregate_collaborators(permuted_hits, max_authors=10)
    if forward != backward:
        return CheckResult(name, False, "reversing the document order changed the aggregate output")
    score_by_pmid = {h.pmid: h.score for h, _ in documents if h.score > 0.0}
    for rec in forward:
        expected = math.fsum(score_by_pmid[s.pmid] for s in rec.supporting)
        if rec.aggregate_score != expected:
            return CheckResult(name, False, f"{rec.canonical_key} sum differs from the fsum oracle")
    return CheckResult(name, True, f"{len(forward)} authors, permutation-invariant, sums match fsum exactly")


def _check_roundtrip(index: VectorIndex) -> CheckResult:
    name = "persistence-roundtrip"
    with tempfile.TemporaryDirectory(prefix="scholar-rag-selftest-") as tmp:
        first = Path(tmp) / "first.bin"
        second = Path(tmp) / "second.bin"
        index.save(first)
        loaded = VectorIndex.load(first)
        loaded.save(second)
        a = first.read_bytes()
        b = second.read_bytes()
        if a != b:
            return CheckResult(name, False, "save -> load -> save is not byte-identical")
        # Any flipped payload byte must be caught by the trailing checksum.
        corrupted = bytearray(a)
        corrupted[len(corrupted) // 2] ^= 0x40
        third = Path(tmp) / "third.bin"
        third.write_bytes(bytes(corrupted))
        try:
            VectorIndex.load(third)
        except CorruptIndexError as exc:
            if exc.field != "checksum":
                return CheckResult(name, False, f"corruption reported as {exc.field!r}, expected 'checksum'")
        else:
            return CheckResult(name, False, "flipped byte was not rejected")
    return CheckResult(name, True, f"{len(index)} vectors byte-identical; flipped byte rejected as checksum")


def _check_index_file(path: Path) -> CheckResult:
    name = "index-file"
    try:
        loaded = VectorIndex.load(path)
    except FileNotFoundError:
        return CheckResult(name, False, f"{path} does not exist")
    except CorruptIndexError as exc:
        return CheckResult(name, False, f"rejected at field {exc.field!r}: {exc}")
    return CheckResult(name, True, f"{len(loaded)} entries, dim {loaded.dim}")


def run_selfcheck(index_path: Path | None = None) -> list[CheckResult]:
    records = _fixture_records()
    vectors = [deterministic_test_embed(document_text(r), CHECK_DIM) for r in records]
    pmids = [r.pmid for r in records]
    index = VectorIndex(CHECK_DIM)
    for pmid, vec in zip(pmids, vectors):
        index.add(pmid, vec)

    results = [
        _check_embedder_determinism(records),
        _check_cosine_oracle(vectors),
        _check_topk_oracle(index, vectors, pmids),
        _check_prompt_ordering(records, index, vectors),
        _check_aggregation(records, index, vectors),
        _check_roundtrip(index),
    ]
    if index_path is not None:
        results.append(_check_index_file(index_path))
    return results
