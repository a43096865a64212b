// JSON shapes of the service endpoints this app consumes. Field names mirror
// the wire format exactly; optional fields are omitted by the server rather
// than sent as null.

export interface DocumentOut {
  pmid: string;
  rank: number;
  score: number;
  title: string;
  year?: number | null;
  authors: string[];
}

export interface SupportingOut {
  pmid: string;
  score: number;
}

export interface CollaboratorOut {
  canonical_key: string;
  display_name: string;
  aggregate_score: number;
  supporting: SupportingOut[];
  topic_terms: string[];
}

export interface GenerationOut {
  raw_text: string;
  model_id: string;
  prompt_hash: string;
  latency_seconds: number;
}

export interface QueryResponse {
  query: string;
  k: number;
  documents: DocumentOut[];
  collaborators: CollaboratorOut[];
  generation?: GenerationOut;
  prompt_hash?: string;
  template_hash: string;
  timings: Record<string, number>;
  total_seconds: number;
}

export interface RecordOut {
  pmid: string;
  title: string;
  abstract: string;
  authors: string[];
  affiliations: string[];
  keywords: string[];
  year?: number | null;
}

export interface QueryRequest {
  query: string;
  k?: number;
  include_generation?: boolean;
}
