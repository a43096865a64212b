import { formatAuthors, formatScore, formatYear } from "./format.js";
import type { CollaboratorOut, DocumentOut, GenerationOut } from "./types.js";
import type { UiError } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export type OpenDocument = (pmid: string) => void;

/** Ranked documents exactly in response order; the UI never re-sorts. */
export function renderDocumentsTable(documents: DocumentOut[], onOpen: OpenDocument): HTMLTableElement {
  const table = el("table", "documents");
  const thead = el("thead");
  const headRow = el("tr");
  for (const column of ["rank", "score", "title", "year", "authors"]) {
    headRow.appendChild(el("th", undefined, column));
  }
  thead.appendChild(headRow);
  table.appendChild(thead);

  const body = el("tbody");
  for (const doc of documents) {
    const row = el("tr");
    row.dataset.pmid = doc.pmid;
    row.appendChild(el("td", undefined, String(doc.rank)));
    row.appendChild(el("td", "score", formatScore(doc.score)));
    const titleCell = el("td");
    const link = el("button", "doc-link", doc.title);
    link.type = "button";
    link.addEventListener("click", () => onOpen(doc.pmid));
    titleCell.appendChild(link);
    row.appendChild(titleCell);
    row.appendChild(el("td", undefined, formatYear(doc.year)));
    row.appendChild(el("td", undefined, formatAuthors(doc.authors)));
    body.appendChild(row);
  }
  table.appendChild(body);
  return table;
}

/** Horizontal similarity bars: axis [0, 1], widths proportional to scores. */
export function renderSimilarityChart(documents: DocumentOut[]): HTMLElement {
  const chart = el("div", "chart");
  chart.setAttribute("role", "img");
  chart.setAttribute("aria-label", "cosine similarity per retrieved document");
  for (const doc of documents) {
    const row = el("div", "chart-row");
    row.appendChild(el("span", "chart-name", `#${doc.rank} PMID ${doc.pmid}`));
    const track = el("div", "chart-track");
    const bar = el("div", "chart-bar");
    bar.style.width = `${doc.score * 100}%`;
    track.appendChild(bar);
    row.appendChild(track);
    row.appendChild(el("span", "chart-score", formatScore(doc.score)));
    chart.appendChild(row);
  }
  return chart;
}

export function renderCollaborators(collaborators: CollaboratorOut[], onOpen: OpenDocument): HTMLElement {
  const section = el("div", "collaborators");
  for (const rec of collaborators) {
    const card = el("div", "collaborator-card");
    card.appendChild(el("h3", "collaborator-name", rec.display_name));
    card.appendChild(el("div", "collaborator-score", `aggregate score ${formatScore(rec.aggregate_score)}`));
    const docs = el("div", "collaborator-docs");
    docs.appendChild(el("span", undefined, "supporting: "));
    for (const sup of rec.supporting) {
      const link = el("button", "doc-link", sup.pmid);
      link.type = "button";
      link.title = `similarity ${formatScore(sup.score)}`;
      link.addEventListener("click", () => onOpen(sup.pmid));
      docs.appendChild(link);
    }
    card.appendChild(docs);
    if (rec.topic_terms.length) {
      const topics = el("div", "collaborator-topics");
      for (const term of rec.topic_terms) {
        topics.appendChild(el("span", "topic-chip", term));
      }
      card.appendChild(topics);
    }
    section.appendChild(card);
  }
  return section;
}

/** Dismissible error banner; names the failed pipeline stage when known. */
export function renderBanner(error: UiError, onDismiss: () => void): HTMLElement {
  const banner = el("div", "banner");
  banner.setAttribute("role", "alert");
  const text = error.stage ? `${error.stage} failed: ${error.message}` : error.message;
  banner.appendChild(el("span", "banner-text", text));
  const dismiss = el("button", "banner-dismiss", "dismiss");
  dismiss.type = "button";
  dismiss.addEventListener("click", onDismiss);
  banner.appendChild(dismiss);
  return banner;
}

export function renderGeneration(generation: GenerationOut): HTMLElement {
  const pane = el("div", "generation");
  pane.appendChild(el("h3", "generation-label", `Model output (${generation.model_id})`));
  pane.appendChild(el("p", "generation-caveat", "Generated text; verify against the evidence above."));
  const text = el("pre", "generation-text", generation.raw_text);
  pane.appendChild(text);
  return pane;
}
