import type {
  ClickResponse,
  FinishResponse,
  SessionInfo,
  StatusResponse,
} from "./types.js";
import { WIRE_VERSION } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail: string,
  ) {
    super(detail);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the session service JSON API. */
export class ApiClient {
  constructor(
    private baseUrl = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, "ConnectionError", `cannot reach server: ${err}`);
    }
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      // non-JSON error bodies fall through with a generic message
    }
    if (!resp.ok) {
      const record = (body ?? {}) as { error?: string; detail?: string };
      throw new ApiError(
        resp.status,
        record.error ?? `HTTP${resp.status}`,
        record.detail ?? `request failed with status ${resp.status}`,
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: Record<string, unknown>): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ v: WIRE_VERSION, ...payload }),
    });
  }

  status(): Promise<StatusResponse> {
    return this.request<StatusResponse>("/status");
  }

  createSessionFromUpload(imageB64: string): Promise<SessionInfo> {
    return this.post<SessionInfo>("/sessions", { image_b64: imageB64 });
  }

  createSessionFromDataset(datasetId: string): Promise<SessionInfo> {
    return this.post<SessionInfo>("/sessions", { dataset_id: datasetId });
  }

  submitClick(
    sessionId: string,
    row: number,
    col: number,
    classLabel: number,
  ): Promise<ClickResponse> {
    return this.post<ClickResponse>(`/sessions/${sessionId}/clicks`, {
      row,
      col,
      class_label: classLabel,
    });
  }

  finishSession(sessionId: string, accept: boolean): Promise<FinishResponse> {
    return this.post<FinishResponse>(`/sessions/${sessionId}/finish`, { accept });
  }

  maskPngUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/mask.png`;
  }
}
