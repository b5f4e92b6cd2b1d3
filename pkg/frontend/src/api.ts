import type {
  LabelQuery,
  SegmentationState,
  SessionMeta,
  SessionRequest,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

/** The endpoints the session controller drives. */
export interface LabelApi {
  createSession(request: SessionRequest): Promise<SessionMeta>;
  getSession(id: string): Promise<SessionMeta>;
  getQuery(id: string): Promise<LabelQuery>;
  submitLabel(id: string, pixel: number, classId: number): Promise<SessionMeta>;
  getSegmentation(id: string): Promise<SegmentationState>;
}

/** Thin typed client for the label service; one method per endpoint. */
export class ApiClient implements LabelApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  createSession(request: SessionRequest): Promise<SessionMeta> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
  }

  getSession(id: string): Promise<SessionMeta> {
    return this.request(`/sessions/${id}`);
  }

  listSessions(): Promise<{ sessions: string[] }> {
    return this.request("/sessions");
  }

  getQuery(id: string): Promise<LabelQuery> {
    return this.request(`/sessions/${id}/query`);
  }

  submitLabel(id: string, pixel: number, classId: number): Promise<SessionMeta> {
    return this.request(`/sessions/${id}/label`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ pixel, class: classId }),
    });
  }

  getSegmentation(id: string): Promise<SegmentationState> {
    return this.request(`/sessions/${id}/segmentation`);
  }

  contextImageUrl(id: string): string {
    return `${this.baseUrl}/sessions/${id}/context`;
  }

  labelImageUrl(id: string): string {
    return `${this.baseUrl}/sessions/${id}/image`;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    return asJson<T>(response);
  }
}
