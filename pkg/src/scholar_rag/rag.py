"""Retrieval-augmented prompt assembly, preserving relevance order under a budget."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import PublicationRecord
from .index import ScoredDocument

DEFAULT_BUDGET_CHARS = 12000
CONTEXTS_SLOT = "{{contexts}}"
QUERY_SLOT = "{{query}}"
_BLOCK_SEPARATOR = "\n\n"


class BudgetExhaustedError(Exception):
    """The budget cannot fit the preamble, the query, and one context block."""


class TemplateError(Exception):
    """The prompt template does not carry exactly one of each placeholder."""


def load_template(path: str | Path | None = None) -> str:
    """Read the prompt template (packaged default unless a path is given)."""
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = (resources.files("scholar_rag") / "templates" / "collaborator_prompt.txt").read_text(
            encoding="utf-8"
        )
    _split_template(text)
    return text


def template_hash(template: str) -> str:
    return hashlib.sha256(template.encode("utf-8")).hexdigest()


def _split_template(template: str) -> list[str]:
    """Split into [text, slot, text, slot, text]; each slot must appear once."""
    for slot in (CONTEXTS_SLOT, QUERY_SLOT):
        if template.count(slot) != 1:
            raise TemplateError(f"template must contain {slot} exactly once")
    segments: list[str] = []
    rest = template
    while rest:
        positions = [(rest.find(slot), slot) for slot in (CONTEXTS_SLOT, QUERY_SLOT) if slot in rest]
        if not positions:
            segments.append(rest)
            break
        pos, slot = min(positions)
        segments.append(rest[:pos])
        segments.append(slot)
        rest = rest[pos + len(slot) :]
    return segments


def _render(template: str, contexts_text: str, query: str) -> str:
    # Single-pass substitution: placeholder-like text inside the data never
    # gets re-substituted.
    out = []
    for segment in _split_template(template):
        if segment == CONTEXTS_SLOT:
            out.append(contexts_text)
        elif segment == QUERY_SLOT:
            out.append(query)
        else:
            out.append(segment)
    return "".join(out)


def render_context_block(rank: int, record: PublicationRecord, score: float) -> str:
    """Fixed block template: rank/pmid/year/title line, authors line, abstract.

    The similarity score is carried as block metadata but not rendered (the
    default template keeps model input free of scores).
    """
    year = str(record.year) if record.year is not None else "n.d."
    authors = ", ".join(a.display_name for a in record.authors)
    head = f"[# {rank}] (PMID {record.pmid}, {year}) {record.title}\nAuthors: {authors}"
    if not record.abstract:
        return head
    return f"{head}\n{record.abstract}"


@dataclass(frozen=True)
class ContextBlock:
    rank: int
    pmid: str
    text: str
    score: float


@dataclass
class PromptPayload:
    """An assembled prompt: ordered context blocks plus the rendered text."""

    query: str
    context_blocks: list[ContextBlock]
    rendered_prompt: str
    truncated: bool
    template_hash: str

    @property
    def prompt_hash(self) -> str:
        return hashlib.sha256(self.rendered_prompt.encode("utf-8")).hexdigest()


def build_prompt(
    q: str,
    ranked: list[tuple[ScoredDocument, PublicationRecord]],
    budget_chars: int = DEFAULT_BUDGET_CHARS,
    template: str | None = None,
) -> PromptPayload:
    """Assemble the prompt from retrieval output, in rank order.

    When the full assembly exceeds budget_chars, whole blocks are dropped
    from the tail (lowest relevance first) until it fits; surviving blocks
    keep their order. Raises BudgetExhaustedError when even the preamble,
    the query, and (if any documents were retrieved) one block do not fit.
    """
    if budget_chars < 1:
        raise ValueError("budget_chars must be positive")
    if template is None:
        template = load_template()
    ranks = [sd.rank for sd, _ in ranked]
    if ranks != sorted(ranks):
        raise ValueError("ranked input must be sorted by rank ascending")
    blocks = [
        ContextBlock(rank=sd.rank, pmid=sd.pmid, text=render_context_block(sd.rank, record, sd.score), score=sd.score)
        for sd, record in ranked
    ]
    for keep in range(len(blocks), -1, -1):
        contexts_text = _BLOCK_SEPARATOR.join(block.text for block in blocks[:keep])
        rendered = _render(template, contexts_text, q)
        if len(rendered) <= budget_chars:
            if keep == 0 and blocks:
                break
            return PromptPayload(
                query=q,
                context_blocks=blocks[:keep],
                rendered_prompt=rendered,
                truncated=keep < len(blocks),
                template_hash=template_hash(template),
            )
    raise BudgetExhaustedError(
        f"budget of {budget_chars} chars cannot fit the preamble, query, and one context block"
    )
