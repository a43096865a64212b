"""Builders and mock backends shared across the test modules."""

from __future__ import annotations

import json

import httpx

from scholar_rag.corpus import AuthorRef, PublicationRecord
from scholar_rag.embedding import deterministic_test_embed
from scholar_rag.recommend import LlmClient, LlmConfig

TEST_DIM = 32


def make_record(
    pmid: str,
    title: str,
    abstract: str = "",
    authors: tuple[str, ...] = (),
    keywords: tuple[str, ...] = (),
    affiliations: tuple[str, ...] = (),
    year: int | None = 2020,
) -> PublicationRecord:
    return PublicationRecord(
        pmid=pmid,
        title=title,
        abstract=abstract,
        authors=[AuthorRef.from_display(name) for name in authors],
        affiliations=list(affiliations),
        keywords=list(keywords),
        year=year,
    )


def jsonl_bytes(rows: list[dict]) -> bytes:
    return ("\n".join(json.dumps(row) for row in rows) + "\n").encode("utf-8")


SAMPLE_ROWS = [
    {
        "pmid": "9001",
        "title": "Attention mechanisms for chest radiograph triage",
        "abstract": "Prioritizing urgent films with saliency pooling.",
        "authors": ["Ng, Alice", "Romero, Carla"],
        "keywords": ["deep learning", "radiology"],
        "year": 2021,
    },
    {
        "pmid": "9002",
        "title": "Deep learning prediction for medical images",
        "abstract": "A survey of predictive models across modalities.",
        "authors": ["Ng, Alice"],
        "keywords": ["deep learning", "survey"],
        "year": 2022,
    },
    {
        "pmid": "9003",
        "title": "Genomic variant calling with graph references",
        "abstract": "Pangenome alignment improves recall.",
        "authors": ["Okoye, Daniel"],
        "keywords": ["genomics"],
        "year": 2019,
    },
    {
        "pmid": "9004",
        "title": "Tumor segmentation networks for MRI volumes",
        "abstract": "Encoder-decoder models with dice loss.",
        "authors": ["Romero, Carla", "Ng, Alice"],
        "keywords": ["deep learning", "mri"],
        "year": 2020,
    },
    {
        "pmid": "9005",
        "title": "Microbiome diversity in coastal sediments",
        "abstract": "Amplicon sequencing of estuarine samples.",
        "authors": ["Haddad, Lina"],
        "keywords": ["microbiome"],
        "year": 2018,
    },
    {
        "pmid": "9006",
        "title": "Self-supervised pretraining improves retinal screening",
        "abstract": "Contrastive features for fundus images.",
        "authors": ["Okoye, Daniel", "Ng, Alice"],
        "keywords": ["deep learning", "ophthalmology"],
        "year": 2023,
    },
]


def embedding_wire_transport(dim: int = TEST_DIM, capture: list | None = None) -> httpx.MockTransport:
    """A fake embedding endpoint speaking the {"inputs"} / {"embeddings"} protocol."""

    def handler(request: httpx.Request) -> httpx.Response:
        if capture is not None:
            capture.append(request)
        texts = json.loads(request.content.decode("utf-8"))["inputs"]
        rows = [deterministic_test_embed(text, dim).tolist() for text in texts]
        return httpx.Response(200, json={"embeddings": rows})

    return httpx.MockTransport(handler)


def llm_wire_transport(reply_text: str = "synthetic collaborator summary", capture: list | None = None) -> httpx.MockTransport:
    """A fake chat-completions endpoint; /v1/models probes answer 200."""

    def handler(request: httpx.Request) -> httpx.Response:
        if capture is not None:
            capture.append(request)
        if request.url.path.endswith("/v1/models"):
            return httpx.Response(200, json={"data": []})
        body = json.loads(request.content.decode("utf-8"))
        return httpx.Response(
            200,
            json={
                "model": body["model"],
                "choices": [{"message": {"role": "assistant", "content": reply_text}}],
            },
        )

    return httpx.MockTransport(handler)


def make_mock_llm(
    reply_text: str = "synthetic collaborator summary",
    capture: list | None = None,
    transport: httpx.MockTransport | None = None,
) -> LlmClient:
    cfg = LlmConfig(endpoint_url="http://llm.test", retry_backoff=0.0)
    transport = transport or llm_wire_transport(reply_text, capture)
    return LlmClient(cfg, client=httpx.Client(transport=transport))
