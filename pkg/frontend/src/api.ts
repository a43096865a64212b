import type { QueryRequest, QueryResponse, RecordOut } from "./types.js";

/** An HTTP error from the service, carrying the failed stage when known. */
export class ServiceError extends Error {
  readonly status: number;
  readonly stage?: string;

  constructor(status: number, message: string, stage?: string) {
    super(message);
    this.name = "ServiceError";
    this.status = status;
    this.stage = stage;
  }
}

async function toServiceError(response: Response): Promise<ServiceError> {
  let detail: unknown;
  try {
    detail = ((await response.json()) as { detail?: unknown }).detail;
  } catch {
    detail = undefined;
  }
  if (typeof detail === "string") {
    return new ServiceError(response.status, detail);
  }
  if (detail !== null && typeof detail === "object") {
    const body = detail as Record<string, unknown>;
    if (typeof body.stage === "string") {
      return new ServiceError(response.status, String(body.message ?? "stage unavailable"), body.stage);
    }
    if (typeof body.error_id === "string") {
      return new ServiceError(response.status, `internal error (id ${body.error_id})`);
    }
  }
  return new ServiceError(response.status, response.statusText || "request failed");
}

export async function postQuery(request: QueryRequest, signal?: AbortSignal): Promise<QueryResponse> {
  const response = await fetch("/query", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(request),
    signal,
  });
  if (!response.ok) {
    throw await toServiceError(response);
  }
  return (await response.json()) as QueryResponse;
}

export async function getDocument(pmid: string, signal?: AbortSignal): Promise<RecordOut> {
  const response = await fetch(`/documents/${encodeURIComponent(pmid)}`, { signal });
  if (!response.ok) {
    throw await toServiceError(response);
  }
  return (await response.json()) as RecordOut;
}
