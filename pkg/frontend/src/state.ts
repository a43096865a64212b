import { postQuery, ServiceError } from "./api.js";
import type { QueryResponse } from "./types.js";

export type RequestStatus = "idle" | "loading" | "error";

export interface UiError {
  message: string;
  stage?: string;
}

export interface UiQueryState {
  queryText: string;
  k: number;
  includeGeneration: boolean;
  status: RequestStatus;
  lastResponse: QueryResponse | null;
  error: UiError | null;
}

type Listener = (state: UiQueryState) => void;

/** Query state with a single in-flight request; resubmitting cancels it.
 *
 * Responses are applied only when they belong to the newest submission, so
 * the rendered results always correspond to the most recent completed
 * request even if an older response arrives late.
 */
export class QueryStore {
  private state: UiQueryState = {
    queryText: "",
    k: 5,
    includeGeneration: false,
    status: "idle",
    lastResponse: null,
    error: null,
  };
  private listeners: Listener[] = [];
  private controller: AbortController | null = null;
  private submission = 0;

  getState(): UiQueryState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<UiQueryState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  setQueryText(text: string): void {
    this.update({ queryText: text });
  }

  setK(k: number): void {
    this.update({ k });
  }

  setIncludeGeneration(enabled: boolean): void {
    this.update({ includeGeneration: enabled });
  }

  dismissError(): void {
    this.update({ error: null, status: "idle" });
  }

  async submit(): Promise<void> {
    const query = this.state.queryText.trim();
    if (!query) {
      this.update({ status: "error", error: { message: "Enter a query first." } });
      return;
    }
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const ticket = ++this.submission;
    this.update({ status: "loading", error: null });
    try {
      const response = await postQuery(
        { query, k: this.state.k, include_generation: this.state.includeGeneration },
        controller.signal,
      );
      if (ticket !== this.submission) {
        return; // superseded by a newer submission
      }
      this.update({ status: "idle", lastResponse: response });
    } catch (err) {
      if (ticket !== this.submission) {
        return;
      }
      if (err instanceof DOMException && err.name === "AbortError") {
        return;
      }
      if (err instanceof ServiceError) {
        this.update({ status: "error", error: { message: err.message, stage: err.stage } });
      } else {
        this.update({ status: "error", error: { message: String(err) } });
      }
    }
  }
}
