// Wire types mirroring the identification service API.

export type Mode = "fgsm" | "cosine" | "tfidf" | "bm25";

export const MODES: readonly Mode[] = ["fgsm", "cosine", "tfidf", "bm25"];

export interface IdentifyRequest {
  captions: string[];
  top_k: number;
  mode?: Mode;
}

export interface EvidenceItem {
  caption: string;
  sentence: string;
  score: number;
}

export interface IdentifyResult {
  doc_id: string;
  class_name: string;
  z: number;
  probability: number;
  evidence: EvidenceItem[];
}

export interface ModelInfo {
  mode: string;
  corpus_id: string;
  K: number;
}

export interface IdentifyResponse {
  results: IdentifyResult[];
  model_info: ModelInfo;
}

export interface DocumentSummary {
  doc_id: string;
  class_name: string;
}

export interface DocumentDetail extends DocumentSummary {
  sentences: string[];
}

export interface HealthBody {
  status: "ready" | "loading";
  corpus_id: string | null;
  K: number;
  mode: string | null;
}
