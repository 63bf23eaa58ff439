// Thin typed client over the service HTTP API.

import type {
  AccuracyRecord,
  Area,
  Estimate,
  EvalSummary,
  ObservationBody,
  SampleRecord,
  SessionInfo,
  TrainReport,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

export interface TrainConfig {
  spacing?: number;
  hyper_policy?: "fixed" | "grid-search";
  min_presence?: number;
}

export interface EvalEntry {
  observation: ObservationBody;
  truth: { x: number; y: number };
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let code = `HTTP ${response.status}`;
      let detail = response.statusText;
      try {
        const doc = (await response.json()) as { error?: string; detail?: string };
        code = doc.error ?? code;
        detail = doc.detail ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, detail);
    }
    return (await response.json()) as T;
  }

  createSession(area: Area): Promise<{ session_id: string }> {
    return this.request("POST", "/api/v1/sessions", { area });
  }

  sessionInfo(sessionId: string): Promise<SessionInfo> {
    return this.request("GET", `/api/v1/sessions/${sessionId}`);
  }

  ingest(sessionId: string, samples: SampleRecord[]): Promise<{ accepted: number }> {
    return this.request("POST", `/api/v1/sessions/${sessionId}/samples`, { samples });
  }

  train(sessionId: string, config: TrainConfig = {}): Promise<TrainReport> {
    return this.request("POST", `/api/v1/sessions/${sessionId}/train`, config);
  }

  radiomap(sessionId: string): Promise<unknown> {
    return this.request("GET", `/api/v1/sessions/${sessionId}/radiomap`);
  }

  localize(sessionId: string, observation: ObservationBody): Promise<Estimate> {
    return this.request("POST", `/api/v1/sessions/${sessionId}/localize`, { observation });
  }

  evaluate(
    sessionId: string,
    entries: EvalEntry[],
  ): Promise<{ summary: EvalSummary; records: AccuracyRecord[] }> {
    return this.request("POST", `/api/v1/sessions/${sessionId}/eval`, {
      observations_with_truth: entries,
    });
  }

  streamUrl(sessionId: string): string {
    return `${this.baseUrl}/api/v1/sessions/${sessionId}/stream`;
  }
}
