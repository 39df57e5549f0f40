import type {
  DocumentDetail,
  DocumentSummary,
  HealthBody,
  IdentifyRequest,
  IdentifyResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status: number | null = null) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (typeof body?.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText || `HTTP ${response.status}`;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      throw new ApiError(await errorDetail(response), response.status);
    }
    return (await response.json()) as T;
  }

  identify(req: IdentifyRequest): Promise<IdentifyResponse> {
    return this.request<IdentifyResponse>("/api/identify", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  documents(): Promise<DocumentSummary[]> {
    return this.request<DocumentSummary[]>("/api/documents");
  }

  document(docId: string): Promise<DocumentDetail> {
    return this.request<DocumentDetail>(`/api/documents/${encodeURIComponent(docId)}`);
  }

  health(): Promise<HealthBody> {
    return this.request<HealthBody>("/api/health");
  }
}
