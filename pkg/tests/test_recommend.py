import json
import math
import random

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scholar_rag.corpus import CorpusStore
from scholar_rag.index import ScoredDocument
from scholar_rag.rag import build_prompt
from scholar_rag.recommend import (
    EmptyGenerationError,
    LlmClient,
    LlmConfig,
    LlmEndpointError,
    LlmTransportError,
    aggregate_collaborators,
    generate,
    keyword_baseline,
)

from helpers import make_mock_llm, make_record


def hit(rank: int, pmid: str, score: float) -> ScoredDocument:
    return ScoredDocument(pmid=pmid, score=score, rank=rank)


class TestAggregateCollaborators:
    def test_scores_sum_across_documents(self):
        ranked = [
            (hit(1, "1", 0.9), make_record("1", "A", authors=("Ng, Alice", "Wu, Bo"), keywords=("mri",))),
            (hit(2, "2", 0.5), make_record("2", "B", authors=("Ng, Alice",), keywords=("mri", "ct"))),
        ]
        recs = aggregate_collaborators(ranked, max_authors=10)
        assert [r.canonical_key for r in recs] == ["ng, alice", "wu, bo"]
        ng = recs[0]
        assert ng.aggregate_score == math.fsum([0.9, 0.5])
        assert [(s.pmid, s.score) for s in ng.supporting] == [("1", 0.9), ("2", 0.5)]
        assert ng.display_name == "Ng, Alice"
        assert ng.topic_terms == ["mri", "ct"]

    def test_non_positive_scores_excluded(self):
        ranked = [
            (hit(1, "1", 0.8), make_record("1", "A", authors=("Ng, Alice",))),
            (hit(2, "2", 0.0), make_record("2", "B", authors=("Ng, Alice", "Zu, Cy"))),
            (hit(3, "3", -0.2), make_record("3", "C", authors=("Ng, Alice", "Zu, Cy"))),
        ]
        recs = aggregate_collaborators(ranked, max_authors=10)
        assert [r.canonical_key for r in recs] == ["ng, alice"]
        assert recs[0].aggregate_score == 0.8
        assert all(r.aggregate_score > 0 for r in recs)

    def test_author_counted_once_per_document(self):
        record = make_record("1", "A", authors=("Ng, Alice", "ng alice"))
        recs = aggregate_collaborators([(hit(1, "1", 0.6), record)], max_authors=10)
        assert len(recs) == 1
        assert recs[0].aggregate_score == 0.6
        # The first spelling in the document wins for that document.
        assert recs[0].display_name == "Ng, Alice"

    def test_display_name_from_best_supporting_document(self):
        ranked = [
            (hit(1, "1", 0.9), make_record("1", "A", authors=("NG, ALICE",))),
            (hit(2, "2", 0.4), make_record("2", "B", authors=("Ng, Alice",))),
        ]
        recs = aggregate_collaborators(ranked, max_authors=10)
        assert recs[0].display_name == "NG, ALICE"

    def test_diacritic_spellings_merge(self):
        ranked = [
            (hit(1, "1", 0.7), make_record("1", "A", authors=("García, José",))),
            (hit(2, "2", 0.3), make_record("2", "B", authors=("Garcia Jose",))),
        ]
        recs = aggregate_collaborators(ranked, max_authors=10)
        assert len(recs) == 1
        assert recs[0].canonical_key == "garcia, jose"
        assert recs[0].aggregate_score == math.fsum([0.7, 0.3])

    def test_ordering_score_then_key(self):
        ranked = [
            (hit(1, "1", 0.5), make_record("1", "A", authors=("Bb, X", "Aa, X"))),
            (hit(2, "2", 0.5), make_record("2", "B", authors=("Cc, X",))),
        ]
        recs = aggregate_collaborators(ranked, max_authors=10)
        # Bb and Aa tie at 0.5 with Cc; canonical key breaks the tie.
        assert [r.canonical_key for r in recs] == ["aa, x", "bb, x", "cc, x"]

    def test_supporting_sorted_by_score_then_pmid(self):
        ranked = [
            (hit(1, "5", 0.4), make_record("5", "A", authors=("Ng, Alice",))),
            (hit(2, "3", 0.4), make_record("3", "B", authors=("Ng, Alice",))),
            (hit(3, "9", 0.8), make_record("9", "C", authors=("Ng, Alice",))),
        ]
        recs = aggregate_collaborators(ranked, max_authors=10)
        assert [s.pmid for s in recs[0].supporting] == ["9", "3", "5"]

    def test_max_authors_cap(self):
        ranked = [
            (hit(i, str(i), 1.0 - i * 0.01), make_record(str(i), "T", authors=(f"Au, N{i}",)))
            for i in range(1, 8)
        ]
        recs = aggregate_collaborators(ranked, max_authors=3)
        assert len(recs) == 3

    def test_max_authors_must_be_positive(self):
        with pytest.raises(ValueError):
            aggregate_collaborators([], max_authors=0)

    def test_topic_terms_top5_count_then_alpha(self):
        docs = []
        for i, kws in enumerate([("b", "a"), ("b", "c"), ("d", "e", "f", "a")], start=1):
            docs.append((hit(i, str(i), 0.5), make_record(str(i), "T", authors=("Ng, A",), keywords=kws)))
        recs = aggregate_collaborators(docs, max_authors=10)
        # counts: a=2 b=2 c=1 d=1 e=1 f=1; top-5 with alpha ties.
        assert recs[0].topic_terms == ["a", "b", "c", "d", "e"]

    def test_empty_input(self):
        assert aggregate_collaborators([], max_authors=5) == []

    def test_authors_with_empty_names_skipped(self):
        record = make_record("1", "T", authors=("", "  ", "Ng, A"))
        recs = aggregate_collaborators([(hit(1, "1", 0.5), record)], max_authors=10)
        assert [r.canonical_key for r in recs] == ["ng, a"]

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_permutation_invariance(self, seed):
        rng = random.Random(seed)
        pool = ["Ng, A", "Wu, B", "García, C", "Oz, D", "Lim, E"]
        ranked = []
        for i in range(rng.randint(1, 12)):
            pmid = str(1000 + i)
            authors = tuple(rng.sample(pool, rng.randint(0, len(pool))))
            score = rng.choice([rng.uniform(-0.5, 1.0), 0.0, 0.75])
            ranked.append(
                (hit(i + 1, pmid, score), make_record(pmid, f"T{i}", authors=authors, keywords=("k1", "k2")))
            )
        baseline = aggregate_collaborators(ranked, max_authors=10)
        shuffled = ranked[:]
        rng.shuffle(shuffled)
        assert aggregate_collaborators(shuffled, max_authors=10) == baseline


class TestKeywordBaseline:
    @pytest.fixture
    def store(self):
        s = CorpusStore(None)
        s.upsert(
            [
                make_record("1", "Deep learning for tumors", abstract="Neural networks segment tumors."),
                make_record("2", "Statistical genetics", abstract="Deep pedigrees and variants."),
                make_record("3", "Ocean acidification trends"),
            ]
        )
        return s

    def test_membership_fraction(self, store):
        hits = keyword_baseline("deep learning tumors", store, 10)
        by_pmid = {h.pmid: h.score for h in hits}
        assert by_pmid["1"] == pytest.approx(1.0)  # all three tokens present
        assert by_pmid["2"] == pytest.approx(1 / 3)  # only "deep"
        assert "3" not in by_pmid  # zero score, never returned

    def test_short_tokens_ignored(self, store):
        # "of" and "ai" are under the 3-char floor; only "ocean" counts.
        hits = keyword_baseline("of ai ocean", store, 10)
        assert [h.pmid for h in hits] == ["3"]
        assert hits[0].score == pytest.approx(1.0)

    def test_repeated_query_tokens_count_once(self, store):
        once = keyword_baseline("deep tumors", store, 10)
        twice = keyword_baseline("deep deep tumors tumors", store, 10)
        assert [(h.pmid, h.score) for h in once] == [(h.pmid, h.score) for h in twice]

    def test_no_qualifying_tokens(self, store):
        assert keyword_baseline("an of to", store, 10) == []
        assert keyword_baseline("", store, 10) == []

    def test_ties_break_by_pmid(self):
        store = CorpusStore(None)
        store.upsert(
            [
                make_record("20", "alpha beta"),
                make_record("10", "alpha beta"),
                make_record("30", "alpha beta gamma"),
            ]
        )
        hits = keyword_baseline("alpha beta", store, 10)
        assert [h.pmid for h in hits] == ["10", "20", "30"]
        assert [h.rank for h in hits] == [1, 2, 3]

    def test_k_caps_results(self, store):
        assert len(keyword_baseline("deep", store, 1)) == 1

    def test_k_must_be_positive(self, store):
        with pytest.raises(ValueError):
            keyword_baseline("deep", store, 0)

    def test_case_insensitive(self, store):
        assert [h.pmid for h in keyword_baseline("DEEP LEARNING", store, 10)] == [
            h.pmid for h in keyword_baseline("deep learning", store, 10)
        ]


def _prompt():
    return build_prompt("who works on alpha?", [], budget_chars=10_000, template="C:{{contexts}} Q:{{query}}")


class TestLlmClient:
    def test_generate_happy_path(self):
        captured = []
        llm = make_mock_llm(reply_text="Dr. A fits best.", capture=captured)
        result = llm.generate(_prompt())
        assert result.raw_text == "Dr. A fits best."
        assert result.model_id == "llama3.2"
        assert result.prompt_hash == _prompt().prompt_hash
        assert result.latency_seconds >= 0.0
        request = captured[0]
        assert request.url.path == "/v1/chat/completions"
        body = json.loads(request.content.decode())
        assert body["model"] == "llama3.2"
        assert body["temperature"] == 0
        assert body["messages"] == [{"role": "user", "content": _prompt().rendered_prompt}]

    def test_endpoint_trailing_slash_ok(self):
        captured = []

        def handler(request):
            captured.append(request)
            return httpx.Response(
                200, json={"model": "m", "choices": [{"message": {"content": "ok"}}]}
            )

        cfg = LlmConfig(endpoint_url="http://llm.test/", retry_backoff=0.0)
        llm = LlmClient(cfg, client=httpx.Client(transport=httpx.MockTransport(handler)))
        llm.generate(_prompt())
        assert str(captured[0].url) == "http://llm.test/v1/chat/completions"

    def test_http_error_not_retried(self):
        attempts = []

        def handler(request):
            attempts.append(1)
            return httpx.Response(500, text="boom " * 100)

        cfg = LlmConfig(endpoint_url="http://llm.test", retry_backoff=0.0)
        llm = LlmClient(cfg, client=httpx.Client(transport=httpx.MockTransport(handler)))
        with pytest.raises(LlmEndpointError) as exc:
            llm.generate(_prompt())
        assert len(attempts) == 1
        assert exc.value.status == 500
        assert len(exc.value.excerpt) <= 200

    def test_transport_errors_retried_three_times(self):
        attempts = []

        def handler(request):
            attempts.append(1)
            raise httpx.ConnectError("refused")

        cfg = LlmConfig(endpoint_url="http://llm.test", retry_backoff=0.0)
        llm = LlmClient(cfg, client=httpx.Client(transport=httpx.MockTransport(handler)))
        with pytest.raises(LlmTransportError):
            llm.generate(_prompt())
        assert len(attempts) == 3

    def test_malformed_body_rejected(self):
        def handler(request):
            return httpx.Response(200, json={"choices": []})

        cfg = LlmConfig(endpoint_url="http://llm.test", retry_backoff=0.0)
        llm = LlmClient(cfg, client=httpx.Client(transport=httpx.MockTransport(handler)))
        with pytest.raises(LlmEndpointError):
            llm.generate(_prompt())

    def test_empty_completion_rejected(self):
        def handler(request):
            return httpx.Response(200, json={"choices": [{"message": {"content": ""}}]})

        cfg = LlmConfig(endpoint_url="http://llm.test", retry_backoff=0.0)
        llm = LlmClient(cfg, client=httpx.Client(transport=httpx.MockTransport(handler)))
        with pytest.raises(EmptyGenerationError):
            llm.generate(_prompt())

    def test_model_id_from_response_body(self):
        def handler(request):
            return httpx.Response(
                200, json={"model": "llama3.2:3b-q4", "choices": [{"message": {"content": "x"}}]}
            )

        cfg = LlmConfig(endpoint_url="http://llm.test", retry_backoff=0.0)
        llm = LlmClient(cfg, client=httpx.Client(transport=httpx.MockTransport(handler)))
        assert llm.generate(_prompt()).model_id == "llama3.2:3b-q4"

    def test_probe_up_and_down(self):
        llm = make_mock_llm()
        assert llm.probe() is True

        def down(request):
            raise httpx.ConnectError("refused")

        cfg = LlmConfig(endpoint_url="http://llm.test", retry_backoff=0.0)
        offline = LlmClient(cfg, client=httpx.Client(transport=httpx.MockTransport(down)))
        assert offline.probe() is False

    def test_requires_endpoint(self):
        assert LlmConfig().enabled is False
        with pytest.raises(ValueError):
            LlmClient(LlmConfig())

    def test_generate_convenience(self):
        def handler(request):
            return httpx.Response(200, json={"choices": [{"message": {"content": "short answer"}}]})

        cfg = LlmConfig(endpoint_url="http://llm.test", retry_backoff=0.0)
        result = generate(_prompt(), cfg, client=httpx.Client(transport=httpx.MockTransport(handler)))
        assert result.raw_text == "short answer"
