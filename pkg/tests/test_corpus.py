import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scholar_rag.corpus import (
    AuthorRef,
    CorpusStore,
    ParseFormatError,
    PublicationRecord,
    StorageError,
    normalize_author,
    parse_records,
    record_to_json,
)

from helpers import jsonl_bytes, make_record


class TestNormalizeAuthor:
    def test_family_given_shape(self):
        assert normalize_author("Smith, Jane") == "smith, jane"
        assert normalize_author("Smith Jane") == "smith, jane"

    def test_diacritics_folded(self):
        assert normalize_author("García, José") == "garcia, jose"
        assert normalize_author("Müller, Jörg") == "muller, jorg"

    def test_whitespace_and_commas_collapsed(self):
        assert normalize_author("  Smith ,  Jane   Q ") == "smith, jane q"

    def test_single_token(self):
        assert normalize_author("DeepMind") == "deepmind"

    def test_empty(self):
        assert normalize_author("") == ""
        assert normalize_author("  ,  ") == ""

    @given(st.text(max_size=40))
    def test_idempotent(self, name):
        once = normalize_author(name)
        assert normalize_author(once) == once

    def test_from_display(self):
        ref = AuthorRef.from_display("García, José")
        assert ref.display_name == "García, José"
        assert ref.canonical_key == "garcia, jose"


class TestPublicationRecord:
    def test_valid(self):
        rec = make_record("123", "A title", year=2000)
        assert rec.pmid == "123"

    @pytest.mark.parametrize("pmid", ["", "12a", "-1", " 12"])
    def test_bad_pmid(self, pmid):
        with pytest.raises(ValueError):
            make_record(pmid, "A title")

    def test_empty_title(self):
        with pytest.raises(ValueError):
            make_record("1", "   ")

    @pytest.mark.parametrize("year", [1899, 2101])
    def test_year_out_of_range(self, year):
        with pytest.raises(ValueError):
            make_record("1", "t", year=year)

    @pytest.mark.parametrize("year", [1900, 2100, None])
    def test_year_bounds_ok(self, year):
        assert make_record("1", "t", year=year).year == year


class TestParseJsonl:
    def test_valid_lines(self):
        data = jsonl_bytes(
            [
                {"pmid": "1", "title": "One", "abstract": "a", "authors": ["X, Y"], "year": 2001},
                {"pmid": "2", "title": "Two"},
            ]
        )
        report = parse_records(data, "jsonl")
        assert [r.pmid for r in report.records] == ["1", "2"]
        assert report.rejections == []
        assert report.total_entries == 2

    def test_blank_lines_ignored(self):
        report = parse_records(b'\n{"pmid": "1", "title": "One"}\n\n', "jsonl")
        assert len(report.records) == 1
        assert report.rejections == []

    def test_malformed_json_rejected_with_line_number(self):
        data = b'{"pmid": "1", "title": "One"}\nnot json\n{"pmid": "3", "title": "Three"}\n'
        report = parse_records(data, "jsonl")
        assert [r.pmid for r in report.records] == ["1", "3"]
        assert len(report.rejections) == 1
        assert report.rejections[0].position == 2

    @pytest.mark.parametrize(
        "row",
        [
            {"title": "no pmid"},
            {"pmid": "1"},
            {"pmid": "1", "title": ""},
            {"pmid": "1", "title": "t", "authors": "not a list"},
            {"pmid": "1", "title": "t", "authors": [1, 2]},
            {"pmid": "1", "title": "t", "year": "2001"},
            {"pmid": "1", "title": "t", "abstract": 5},
            {"pmid": "x1", "title": "t"},
        ],
    )
    def test_bad_rows_rejected(self, row):
        report = parse_records(jsonl_bytes([row]), "jsonl")
        assert report.records == []
        assert len(report.rejections) == 1

    def test_integer_pmid_coerced(self):
        report = parse_records(jsonl_bytes([{"pmid": 42, "title": "t"}]), "jsonl")
        assert report.records[0].pmid == "42"

    def test_null_abstract_becomes_empty(self):
        report = parse_records(jsonl_bytes([{"pmid": "1", "title": "t", "abstract": None}]), "jsonl")
        assert report.records[0].abstract == ""

    def test_invalid_utf8_is_fatal(self):
        with pytest.raises(ParseFormatError):
            parse_records(b"\xff\xfe\x00bad", "jsonl")

    def test_unknown_format_is_fatal(self):
        with pytest.raises(ParseFormatError):
            parse_records(b"{}", "csv")


PUBMED_XML = """<?xml version="1.0"?>
<PubmedArticleSet>
  <PubmedArticle>
    <MedlineCitation>
      <PMID>33087912</PMID>
      <Article>
        <Journal><JournalIssue><PubDate><Year>2021</Year></PubDate></JournalIssue></Journal>
        <ArticleTitle>Deep Learning Prediction of <i>TERT</i> Promoter Status</ArticleTitle>
        <Abstract>
          <AbstractText Label="BACKGROUND">First part.</AbstractText>
          <AbstractText Label="METHODS">Second part.</AbstractText>
        </Abstract>
        <AuthorList>
          <Author>
            <LastName>Kim</LastName>
            <ForeName>Jinhee</ForeName>
            <AffiliationInfo><Affiliation>Dept A</Affiliation></AffiliationInfo>
          </Author>
          <Author>
            <LastName>Lee</LastName>
            <Initials>S</Initials>
            <AffiliationInfo><Affiliation>Dept A</Affiliation></AffiliationInfo>
            <AffiliationInfo><Affiliation>Dept B</Affiliation></AffiliationInfo>
          </Author>
          <Author>
            <CollectiveName>The Imaging Consortium</CollectiveName>
          </Author>
        </AuthorList>
      </Article>
      <KeywordList><Keyword>thyroid</Keyword><Keyword>TERT</Keyword></KeywordList>
    </MedlineCitation>
  </PubmedArticle>
  <PubmedArticle>
    <MedlineCitation>
      <PMID>7</PMID>
      <Article>
        <Journal><JournalIssue><PubDate><MedlineDate>2019 Jan-Feb</MedlineDate></PubDate></JournalIssue></Journal>
        <ArticleTitle>Range-dated article</ArticleTitle>
      </Article>
    </MedlineCitation>
  </PubmedArticle>
  <PubmedArticle>
    <MedlineCitation>
      <PMID>8</PMID>
      <Article></Article>
    </MedlineCitation>
  </PubmedArticle>
</PubmedArticleSet>
"""


class TestParsePubmedXml:
    def test_full_citation(self):
        report = parse_records(PUBMED_XML.encode(), "pubmed-xml")
        rec = report.records[0]
        assert rec.pmid == "33087912"
        assert rec.title == "Deep Learning Prediction of TERT Promoter Status"
        assert rec.abstract == "First part.\nSecond part."
        assert [a.display_name for a in rec.authors] == ["Kim Jinhee", "Lee S", "The Imaging Consortium"]
        assert rec.affiliations == ["Dept A", "Dept B"]
        assert rec.keywords == ["thyroid", "TERT"]
        assert rec.year == 2021

    def test_medlinedate_year_fallback(self):
        report = parse_records(PUBMED_XML.encode(), "pubmed-xml")
        assert report.records[1].year == 2019

    def test_missing_title_rejected_with_position(self):
        report = parse_records(PUBMED_XML.encode(), "pubmed-xml")
        assert len(report.records) == 2
        assert len(report.rejections) == 1
        assert report.rejections[0].position == 3
        assert "title" in report.rejections[0].reason

    def test_malformed_xml_is_fatal(self):
        with pytest.raises(ParseFormatError):
            parse_records(b"<PubmedArticleSet><oops", "pubmed-xml")

    def test_single_citation_root(self):
        xml = "<MedlineCitation><PMID>5</PMID><Article><ArticleTitle>T</ArticleTitle></Article></MedlineCitation>"
        report = parse_records(xml.encode(), "pubmed-xml")
        assert [r.pmid for r in report.records] == ["5"]


class TestRecordJson:
    def test_round_trip(self):
        rec = make_record(
            "11", "Title", abstract="Abs", authors=("García, José",), keywords=("k1",), affiliations=("aff",), year=2005
        )
        line = json.dumps(record_to_json(rec)).encode()
        back = parse_records(line, "jsonl").records[0]
        assert back == rec

    def test_year_omitted_when_none(self):
        obj = record_to_json(make_record("1", "t", year=None))
        assert "year" not in obj


class TestCorpusStoreMemory:
    def test_upsert_counts_and_revision(self):
        store = CorpusStore(None)
        report = store.upsert([make_record("1", "a"), make_record("2", "b")])
        assert (report.inserted, report.replaced, report.revision) == (2, 0, 1)
        report = store.upsert([make_record("2", "b2"), make_record("3", "c")])
        assert (report.inserted, report.replaced, report.revision) == (1, 1, 2)
        assert store.get("2").title == "b2"
        assert len(store) == 3
        assert "3" in store

    def test_last_wins_within_batch(self):
        store = CorpusStore(None)
        report = store.upsert([make_record("1", "first"), make_record("1", "second")])
        assert (report.inserted, report.replaced) == (1, 0)
        assert store.get("1").title == "second"

    def test_empty_batch_still_bumps_revision(self):
        store = CorpusStore(None)
        assert store.upsert([]).revision == 1
        assert store.upsert([]).revision == 2


class TestCorpusStoreDisk:
    def test_persists_across_reopen(self, tmp_path):
        root = tmp_path / "corpus"
        store = CorpusStore(root)
        store.upsert([make_record("1", "a", authors=("X, Y",))])
        store.upsert([make_record("2", "b")])
        again = CorpusStore(root)
        assert again.revision == 2
        assert {r.pmid for r in again.all_records()} == {"1", "2"}
        assert again.get("1").authors[0].display_name == "X, Y"

    def test_manifest_is_commit_point(self, tmp_path):
        root = tmp_path / "corpus"
        store = CorpusStore(root)
        store.upsert([make_record("1", "a")])
        # A crashed writer may leave a newer snapshot without updating the
        # manifest; reopening must serve the committed revision.
        (root / "corpus-000002.jsonl").write_bytes(b"garbage that is not jsonl\n")
        again = CorpusStore(root)
        assert again.revision == 1
        assert len(again) == 1

    def test_missing_snapshot_fails_closed(self, tmp_path):
        root = tmp_path / "corpus"
        store = CorpusStore(root)
        store.upsert([make_record("1", "a")])
        (root / "corpus-000001.jsonl").unlink()
        with pytest.raises(StorageError):
            CorpusStore(root)

    def test_corrupt_snapshot_fails_closed(self, tmp_path):
        root = tmp_path / "corpus"
        store = CorpusStore(root)
        store.upsert([make_record("1", "a")])
        (root / "corpus-000001.jsonl").write_text('{"title": "no pmid"}\n')
        with pytest.raises(StorageError):
            CorpusStore(root)

    def test_failed_write_leaves_state_unchanged(self, tmp_path, monkeypatch):
        store = CorpusStore(tmp_path / "corpus")
        store.upsert([make_record("1", "a")])

        def boom(path, data):
            raise OSError("disk full")

        monkeypatch.setattr("scholar_rag.corpus.atomic_write", boom)
        with pytest.raises(StorageError):
            store.upsert([make_record("2", "b")])
        assert store.revision == 1
        assert "2" not in store
        monkeypatch.undo()
        assert CorpusStore(tmp_path / "corpus").revision == 1
