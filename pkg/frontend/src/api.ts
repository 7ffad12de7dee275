/**
 * Typed client for the splatedit service. Every UI action goes through
 * here, so the request-schema contract tests pin this module down.
 */

export interface SessionDescriptor {
  id: string;
  scene_id: string;
  status: string;
  round: number;
  instruction: string;
  t_roi: string | null;
  extraction_fell_back: boolean;
  roi_size: number | null;
  stage_seconds: Record<string, number>;
  last_loss: number | null;
  last_error: string | null;
}

export interface Box3 {
  min: [number, number, number];
  max: [number, number, number];
}

export interface RoiRequestBody {
  add: number[];
  del: number[];
  box: Box3 | null;
}

export interface LossEvent {
  round: number;
  loss: number;
}

export type OverlayMode = "color" | "roi" | "overlay";

export type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchFn = (url, init) => fetch(url, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      const detail = await response.text().catch(() => "");
      throw new ApiError(response.status, `${path}: ${response.status} ${detail}`);
    }
    return response;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await this.request(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await response.json()) as T;
  }

  async health(): Promise<{ status: string; version: string }> {
    const response = await this.request("/health");
    return response.json();
  }

  async uploadScene(scenePly: Blob, camerasJson: Blob): Promise<{ scene_id: string }> {
    const form = new FormData();
    form.append("scene", scenePly, "scene.ply");
    form.append("cameras", camerasJson, "cameras.json");
    const response = await this.request("/scenes", { method: "POST", body: form });
    return response.json();
  }

  renderUrl(sceneId: string, view: number, channel: OverlayMode, sessionId: string | null): string {
    const params = new URLSearchParams({ view: String(view), channel });
    if (sessionId) params.set("session_id", sessionId);
    return `${this.baseUrl}/scenes/${sceneId}/render?${params.toString()}`;
  }

  async fetchFrame(sceneId: string, view: number, channel: OverlayMode,
                   sessionId: string | null): Promise<Blob> {
    const params = new URLSearchParams({ view: String(view), channel });
    if (sessionId) params.set("session_id", sessionId);
    const response = await this.request(`/scenes/${sceneId}/render?${params.toString()}`);
    return response.blob();
  }

  async pick(sceneId: string, view: number, x: number, y: number,
             sessionId: string | null): Promise<number | null> {
    const body: Record<string, unknown> = { view, x, y };
    if (sessionId) body.session_id = sessionId;
    const reply = await this.postJson<{ gaussian_index: number | null }>(
      `/scenes/${sceneId}/pick`, body,
    );
    return reply.gaussian_index;
  }

  async suggestBox(sceneId: string, view: number,
                   x0: number, y0: number, x1: number, y1: number,
                   sessionId: string | null): Promise<Box3 | null> {
    const body: Record<string, unknown> = { view, x0, y0, x1, y1 };
    if (sessionId) body.session_id = sessionId;
    const reply = await this.postJson<{ box: Box3 | null }>(`/scenes/${sceneId}/box`, body);
    return reply.box;
  }

  async createSession(sceneId: string, instruction: string): Promise<SessionDescriptor> {
    return this.postJson("/sessions", { scene_id: sceneId, instruction });
  }

  async runStage(sessionId: string,
                 stage: "describe" | "extract" | "masks" | "lift"): Promise<Record<string, unknown>> {
    return this.postJson(`/sessions/${sessionId}/${stage}`, {});
  }

  async applyRoi(sessionId: string, body: RoiRequestBody): Promise<{ selected: number }> {
    return this.postJson(`/sessions/${sessionId}/roi`, body);
  }

  async start(sessionId: string, maxRounds: number | null): Promise<SessionDescriptor> {
    return this.postJson(`/sessions/${sessionId}/start`,
                         maxRounds === null ? {} : { max_rounds: maxRounds });
  }

  async pause(sessionId: string): Promise<SessionDescriptor> {
    return this.postJson(`/sessions/${sessionId}/pause`, {});
  }

  async resume(sessionId: string, maxRounds: number | null): Promise<SessionDescriptor> {
    return this.postJson(`/sessions/${sessionId}/resume`,
                         maxRounds === null ? {} : { max_rounds: maxRounds });
  }

  async descriptor(sessionId: string): Promise<SessionDescriptor> {
    const response = await this.request(`/sessions/${sessionId}`);
    return response.json();
  }

  /** Open the NDJSON loss stream; the caller consumes the body. */
  async openEvents(sessionId: string): Promise<Response> {
    return this.request(`/sessions/${sessionId}/events`);
  }

  async exportScene(sessionId: string): Promise<Blob> {
    const response = await this.request(`/sessions/${sessionId}/export`);
    return response.blob();
  }
}
