"""Publication metadata corpus: parsing, author normalization, revisioned storage."""

from __future__ import annotations

import json
import re
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from .files import atomic_write

_PMID_RE = re.compile(r"^[0-9]+$")
_YEAR_RE = re.compile(r"(19|20)\d\d")

MANIFEST_NAME = "manifest.json"


class ParseFormatError(Exception):
    """Fatal: the input stream as a whole cannot be parsed."""


class StorageError(Exception):
    """A corpus snapshot could not be written or read; store state unchanged."""


def normalize_author(display_name: str) -> str:
    """Fold a published author name into a canonical aggregation key.

    NFKD-normalizes, strips combining marks, lowercases, collapses whitespace
    and commas, and rebuilds as "family, given ..." (family = first token).
    Idempotent: normalizing a canonical key returns it unchanged.
    """
    folded = unicodedata.normalize("NFKD", display_name)
    folded = "".join(ch for ch in folded if not unicodedata.combining(ch))
    tokens = folded.lower().replace(",", " ").split()
    if not tokens:
        return ""
    if len(tokens) == 1:
        return tokens[0]
    return f"{tokens[0]}, {' '.join(tokens[1:])}"


@dataclass(frozen=True)
class AuthorRef:
    """An author as published plus the normalized key used for aggregation."""

    display_name: str
    canonical_key: str

    @classmethod
    def from_display(cls, display_name: str) -> "AuthorRef":
        return cls(display_name=display_name, canonical_key=normalize_author(display_name))


@dataclass
class PublicationRecord:
    """One PubMed entry; the unit of the retrieval corpus."""

    pmid: str
    title: str
    abstract: str = ""
    authors: list[AuthorRef] = field(default_factory=list)
    affiliations: list[str] = field(default_factory=list)
    keywords: list[str] = field(default_factory=list)
    year: int | None = None

    def __post_init__(self) -> None:
        if not _PMID_RE.match(self.pmid):
            raise ValueError(f"pmid must be a nonempty digit string, got {self.pmid!r}")
        if not self.title.strip():
            raise ValueError("title must be nonempty")
        if self.year is not None and not 1900 <= self.year <= 2100:
            raise ValueError(f"year {self.year} outside 1900..2100")


@dataclass(frozen=True)
class ParseRejection:
    """A malformed entry: 1-based line (jsonl) or element (pubmed-xml) position."""

    position: int
    reason: str


@dataclass
class ParseReport:
    """Accepted records plus per-entry rejections, covering every input entry."""

    records: list[PublicationRecord]
    rejections: list[ParseRejection]

    @property
    def total_entries(self) -> int:
        return len(self.records) + len(self.rejections)


def parse_records(data: bytes, fmt: str = "jsonl") -> ParseReport:
    """Parse a corpus export into records, keeping source order.

    ``fmt`` is "jsonl" (one JSON object per line, blank lines ignored) or
    "pubmed-xml" (PubmedArticleSet / MedlineCitation). Malformed entries are
    rejected individually with their position; an undecodable or structurally
    unparseable stream raises ParseFormatError.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseFormatError(f"input is not valid UTF-8: {exc}") from exc
    if fmt == "jsonl":
        return _parse_jsonl(text)
    if fmt == "pubmed-xml":
        return _parse_pubmed_xml(text)
    raise ParseFormatError(f"unknown corpus format {fmt!r}")


def _parse_jsonl(text: str) -> ParseReport:
    records: list[PublicationRecord] = []
    rejections: list[ParseRejection] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            records.append(_record_from_obj(obj))
        except (json.JSONDecodeError, ValueError) as exc:
            rejections.append(ParseRejection(position=lineno, reason=str(exc)))
    return ParseReport(records=records, rejections=rejections)


def _record_from_obj(obj: object) -> PublicationRecord:
    if not isinstance(obj, dict):
        raise ValueError("entry is not a JSON object")
    pmid = obj.get("pmid")
    if isinstance(pmid, int):
        pmid = str(pmid)
    if not isinstance(pmid, str) or not pmid:
        raise ValueError("missing pmid")
    title = obj.get("title")
    if not isinstance(title, str) or not title.strip():
        raise ValueError("missing title")
    abstract = obj.get("abstract", "")
    if abstract is None:
        abstract = ""
    if not isinstance(abstract, str):
        raise ValueError("abstract must be a string")
    year = obj.get("year")
    if year is not None and not isinstance(year, int):
        raise ValueError("year must be an integer")
    return PublicationRecord(
        pmid=pmid,
        title=title,
        abstract=abstract,
        authors=[AuthorRef.from_display(name) for name in _string_list(obj, "authors")],
        affiliations=_string_list(obj, "affiliations"),
        keywords=_string_list(obj, "keywords"),
        year=year,
    )


def _string_list(obj: dict, key: str) -> list[str]:
    value = obj.get(key, [])
    if value is None:
        return []
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ValueError(f"{key} must be an array of strings")
    return value


def _parse_pubmed_xml(text: str) -> ParseReport:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseFormatError(f"malformed XML: {exc}") from exc
    articles = root.findall(".//MedlineCitation")
    if root.tag == "MedlineCitation":
        articles = [root]
    records: list[PublicationRecord] = []
    rejections: list[ParseRejection] = []
    for pos, citation in enumerate(articles, start=1):
        try:
            records.append(_record_from_citation(citation))
        except ValueError as exc:
            rejections.append(ParseRejection(position=pos, reason=str(exc)))
    return ParseReport(records=records, rejections=rejections)


def _record_from_citation(citation: ET.Element) -> PublicationRecord:
    pmid = _element_text(citation.find("PMID"))
    if not pmid:
        raise ValueError("missing pmid")
    article = citation.find("Article")
    title = _element_text(article.find("ArticleTitle")) if article is not None else ""
    if not title.strip():
        raise ValueError("missing title")
    abstract = "\n".join(
        t for node in citation.findall(".//Abstract/AbstractText")
        if (t := _element_text(node))
    )
    authors = []
    affiliations = []
    for author in citation.findall(".//AuthorList/Author"):
        display = _author_display(author)
        if display:
            authors.append(AuthorRef.from_display(display))
        for aff in author.findall(".//AffiliationInfo/Affiliation"):
            value = _element_text(aff)
            if value and value not in affiliations:
                affiliations.append(value)
    keywords = [
        t for node in citation.findall(".//KeywordList/Keyword")
        if (t := _element_text(node))
    ]
    return PublicationRecord(
        pmid=pmid,
        title=title,
        abstract=abstract,
        authors=authors,
        affiliations=affiliations,
        keywords=keywords,
        year=_citation_year(citation),
    )


def _element_text(node: ET.Element | None) -> str:
    if node is None:
        return ""
    return "".join(node.itertext()).strip()


def _author_display(author: ET.Element) -> str:
    collective = _element_text(author.find("CollectiveName"))
    if collective:
        return collective
    last = _element_text(author.find("LastName"))
    given = _element_text(author.find("ForeName")) or _element_text(author.find("Initials"))
    return f"{last} {given}".strip()


def _citation_year(citation: ET.Element) -> int | None:
    year = _element_text(citation.find(".//Journal/JournalIssue/PubDate/Year"))
    if not year:
        # MedlineDate carries free-form ranges like "2020 Jan-Feb"
        match = _YEAR_RE.search(_element_text(citation.find(".//Journal/JournalIssue/PubDate/MedlineDate")))
        year = match.group(0) if match else ""
    try:
        return int(year) if year else None
    except ValueError:
        return None


def record_to_json(record: PublicationRecord) -> dict:
    """Corpus-file representation of a record (see the JSONL schema)."""
    obj: dict = {
        "pmid": record.pmid,
        "title": record.title,
        "abstract": record.abstract,
        "authors": [a.display_name for a in record.authors],
        "affiliations": record.affiliations,
        "keywords": record.keywords,
    }
    if record.year is not None:
        obj["year"] = record.year
    return obj


@dataclass(frozen=True)
class UpsertReport:
    inserted: int
    replaced: int
    revision: int


class CorpusStore:
    """pmid-keyed record store; one JSONL snapshot per revision plus a manifest.

    Pass ``root=None`` for a purely in-memory store. Mutations are atomic:
    the manifest rename is the commit point, and a failed write leaves both
    the in-memory state and the revision unchanged.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None
        self._records: dict[str, PublicationRecord] = {}
        self.revision = 0
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            self._load_current()

    def _load_current(self) -> None:
        assert self.root is not None
        manifest_path = self.root / MANIFEST_NAME
        if not manifest_path.exists():
            return
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            revision = int(manifest["revision"])
            snapshot = self.root / str(manifest["snapshot"])
            report = parse_records(snapshot.read_bytes(), "jsonl")
        except (OSError, ValueError, KeyError, ParseFormatError) as exc:
            raise StorageError(f"cannot load corpus store at {self.root}: {exc}") from exc
        if report.rejections:
            first = report.rejections[0]
            raise StorageError(
                f"corrupt snapshot {snapshot.name}: line {first.position}: {first.reason}"
            )
        self._records = {r.pmid: r for r in report.records}
        self.revision = revision

    def upsert(self, batch: list[PublicationRecord]) -> UpsertReport:
        """Insert or replace records, last occurrence of a pmid winning.

        The revision increases by exactly one per call, including for an
        empty batch (a committed no-op is still a revision).
        """
        merged = {r.pmid: r for r in batch}
        inserted = sum(1 for pmid in merged if pmid not in self._records)
        replaced = len(merged) - inserted
        new_records = dict(self._records)
        new_records.update(merged)
        new_revision = self.revision + 1
        if self.root is not None:
            self._write_snapshot(new_records, new_revision)
        self._records = new_records
        self.revision = new_revision
        return UpsertReport(inserted=inserted, replaced=replaced, revision=new_revision)

    def _write_snapshot(self, records: dict[str, PublicationRecord], revision: int) -> None:
        assert self.root is not None
        snapshot_name = f"corpus-{revision:06d}.jsonl"
        lines = "".join(json.dumps(record_to_json(r), ensure_ascii=False) + "\n" for r in records.values())
        try:
            atomic_write(self.root / snapshot_name, lines.encode("utf-8"))
            manifest = json.dumps({"revision": revision, "snapshot": snapshot_name}) + "\n"
            atomic_write(self.root / MANIFEST_NAME, manifest.encode("utf-8"))
        except OSError as exc:
            raise StorageError(f"snapshot write failed: {exc}") from exc

    def get(self, pmid: str) -> PublicationRecord | None:
        return self._records.get(pmid)

    def all_records(self) -> list[PublicationRecord]:
        return list(self._records.values())

    def __contains__(self, pmid: str) -> bool:
        return pmid in self._records

    def __len__(self) -> int:
        return len(self._records)
