/** Typed client for the gateway API. The base URL is configurable at runtime. */

import type {
  ApiErrorBody,
  AuditRecord,
  BackendChoice,
  HistoryMessage,
  PathChoice,
  SessionHandle,
  TurnResponse,
} from "./types.js";

export class GatewayError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "GatewayError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}/api/v1${path}`;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.url(path), init);
    } catch (err) {
      throw new GatewayError(0, "unreachable", `gateway unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let body: Partial<ApiErrorBody> = {};
      try {
        body = (await response.json()) as ApiErrorBody;
      } catch {
        // non-JSON error body; fall through with defaults
      }
      throw new GatewayError(
        response.status,
        body.code ?? "http_error",
        body.message ?? `gateway returned ${response.status}`,
      );
    }
    return (await response.json()) as T;
  }

  createSession(path: PathChoice, backendMode: BackendChoice): Promise<SessionHandle> {
    return this.request<SessionHandle>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ path, backend_mode: backendMode }),
    });
  }

  sendMessage(sessionId: string, text: string): Promise<TurnResponse> {
    return this.request<TurnResponse>(`/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  getHistory(sessionId: string): Promise<HistoryMessage[]> {
    return this.request<HistoryMessage[]>(`/sessions/${sessionId}/history`);
  }

  getAuditRecords(params: {
    sessionId?: string;
    stepKind?: string;
    path?: string;
  }): Promise<AuditRecord[]> {
    const query = new URLSearchParams();
    if (params.sessionId) query.set("session_id", params.sessionId);
    if (params.stepKind) query.set("step_kind", params.stepKind);
    if (params.path) query.set("path", params.path);
    const suffix = query.toString() ? `?${query.toString()}` : "";
    return this.request<AuditRecord[]>(`/audit/records${suffix}`);
  }
}
