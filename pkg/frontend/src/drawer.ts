import { getDocument, ServiceError } from "./api.js";
import { formatAuthors, formatYear } from "./format.js";
import type { RecordOut } from "./types.js";

/** Detail drawer for one stored record; repeated opens reuse the first fetch. */
export class DocumentDrawer {
  private cache = new Map<string, RecordOut>();

  constructor(private root: HTMLElement) {}

  async open(pmid: string): Promise<void> {
    const cached = this.cache.get(pmid);
    if (cached) {
      this.renderRecord(cached);
      return;
    }
    this.root.hidden = false;
    this.root.replaceChildren(this.heading(`PMID ${pmid}`), this.paragraph("loading", "loading..."));
    try {
      const record = await getDocument(pmid);
      this.cache.set(pmid, record);
      this.renderRecord(record);
    } catch (error) {
      if (error instanceof ServiceError && error.status === 404) {
        this.renderNotFound(pmid);
      } else {
        this.renderFailure(pmid, error);
      }
    }
  }

  close(): void {
    this.root.hidden = true;
    this.root.replaceChildren();
  }

  private renderRecord(record: RecordOut): void {
    this.root.hidden = false;
    const parts: HTMLElement[] = [this.closeButton(), this.heading(record.title)];
    const meta = `PMID ${record.pmid} | ${formatYear(record.year)} | ${formatAuthors(record.authors)}`;
    parts.push(this.paragraph("drawer-meta", meta));
    parts.push(this.paragraph("drawer-abstract", record.abstract || "(no abstract)"));
    if (record.keywords.length) {
      parts.push(this.paragraph("drawer-keywords", `keywords: ${record.keywords.join("; ")}`));
    }
    this.root.replaceChildren(...parts);
  }

  private renderNotFound(pmid: string): void {
    this.root.hidden = false;
    this.root.replaceChildren(
      this.closeButton(),
      this.heading(`PMID ${pmid}`),
      this.paragraph("drawer-missing", `No stored document with PMID ${pmid}.`),
    );
  }

  private renderFailure(pmid: string, error: unknown): void {
    const message = error instanceof Error ? error.message : String(error);
    this.root.hidden = false;
    this.root.replaceChildren(
      this.closeButton(),
      this.heading(`PMID ${pmid}`),
      this.paragraph("drawer-error", `Could not load document: ${message}`),
    );
  }

  private heading(text: string): HTMLElement {
    const node = document.createElement("h2");
    node.textContent = text;
    return node;
  }

  private paragraph(className: string, text: string): HTMLElement {
    const node = document.createElement("p");
    node.className = className;
    node.textContent = text;
    return node;
  }

  private closeButton(): HTMLElement {
    const button = document.createElement("button");
    button.type = "button";
    button.className = "drawer-close";
    button.textContent = "close";
    button.addEventListener("click", () => this.close());
    return button;
  }
}
