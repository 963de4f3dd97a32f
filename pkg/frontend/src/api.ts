/** Typed client for the control-plane HTTP API.
 *
 * Every request is checked against DOCUMENTED_ENDPOINTS before it leaves the
 * client; the console can only ever speak the documented protocol, and the
 * contract tests assert the endpoints actually used stay inside this list.
 */

import type {
  EventRecord,
  InjectKind,
  InjectResult,
  InstanceState,
  InstanceSummary,
  PlacementPlan,
  ScenarioSummary,
} from "./types.js";

export const DOCUMENTED_ENDPOINTS = [
  "GET /api/v1/scenarios",
  "POST /api/v1/scenarios/validate",
  "GET /api/v1/injects",
  "GET /api/v1/instances",
  "POST /api/v1/instances",
  "GET /api/v1/instances/{id}",
  "GET /api/v1/instances/{id}/plan",
  "POST /api/v1/instances/{id}/commands",
  "POST /api/v1/instances/{id}/step",
  "POST /api/v1/instances/{id}/injects",
  "GET /api/v1/instances/{id}/events",
] as const;

export type Endpoint = (typeof DOCUMENTED_ENDPOINTS)[number];

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class RangeApi {
  /** Endpoint patterns used over this client's lifetime (for contract tests). */
  readonly used = new Set<Endpoint>();

  constructor(readonly base: string = "") {}

  private async request<T>(
    endpoint: Endpoint,
    path: string,
    init?: RequestInit,
  ): Promise<T> {
    if (!DOCUMENTED_ENDPOINTS.includes(endpoint)) {
      throw new Error(`undocumented endpoint: ${endpoint}`);
    }
    this.used.add(endpoint);
    const response = await fetch(this.base + path, init);
    const text = await response.text();
    let body: unknown = null;
    try {
      body = text ? JSON.parse(text) : null;
    } catch {
      body = null;
    }
    if (!response.ok) {
      const err = (body ?? {}) as { code?: string; message?: string };
      throw new ApiError(
        response.status,
        err.code ?? `HTTP_${response.status}`,
        err.message ?? response.statusText,
      );
    }
    return body as T;
  }

  private post<T>(endpoint: Endpoint, path: string, body: unknown): Promise<T> {
    return this.request<T>(endpoint, path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async listScenarios(): Promise<ScenarioSummary[]> {
    const body = await this.request<{ scenarios: ScenarioSummary[] }>(
      "GET /api/v1/scenarios",
      "/api/v1/scenarios",
    );
    return body.scenarios;
  }

  async validateScenario(text: string): Promise<{ ok: boolean; errors: unknown[] }> {
    this.used.add("POST /api/v1/scenarios/validate");
    const response = await fetch(`${this.base}/api/v1/scenarios/validate`, {
      method: "POST",
      headers: { "content-type": "text/plain; charset=utf-8" },
      body: text,
    });
    return (await response.json()) as { ok: boolean; errors: unknown[] };
  }

  async listInjectKinds(): Promise<InjectKind[]> {
    const body = await this.request<{ injects: InjectKind[] }>(
      "GET /api/v1/injects",
      "/api/v1/injects",
    );
    return body.injects;
  }

  async listInstances(): Promise<InstanceSummary[]> {
    const body = await this.request<{ instances: InstanceSummary[] }>(
      "GET /api/v1/instances",
      "/api/v1/instances",
    );
    return body.instances;
  }

  createInstance(scenario: string, seed: number): Promise<{ id: string; state: InstanceState }> {
    return this.post("POST /api/v1/instances", "/api/v1/instances", { scenario, seed });
  }

  getInstance(id: string): Promise<InstanceState> {
    return this.request("GET /api/v1/instances/{id}", `/api/v1/instances/${id}`);
  }

  getPlan(id: string): Promise<PlacementPlan> {
    return this.request("GET /api/v1/instances/{id}/plan", `/api/v1/instances/${id}/plan`);
  }

  sendCommand(id: string, command: string): Promise<InstanceState> {
    return this.post(
      "POST /api/v1/instances/{id}/commands",
      `/api/v1/instances/${id}/commands`,
      { command },
    );
  }

  step(id: string, ticks: number): Promise<{ state: InstanceState; appended: number }> {
    return this.post("POST /api/v1/instances/{id}/step", `/api/v1/instances/${id}/step`, {
      ticks,
    });
  }

  fireInject(
    id: string,
    body: { kind: string; params?: Record<string, number>; seed?: number; source_node?: string; target_node?: string },
  ): Promise<InjectResult> {
    return this.post("POST /api/v1/instances/{id}/injects", `/api/v1/instances/${id}/injects`, body);
  }

  async getEvents(
    id: string,
    opts: { since?: number; kind?: string } = {},
  ): Promise<EventRecord[]> {
    const params = new URLSearchParams();
    if (opts.since !== undefined) params.set("since", String(opts.since));
    if (opts.kind) params.set("kind", opts.kind);
    const query = params.toString();
    const body = await this.request<{ events: EventRecord[] }>(
      "GET /api/v1/instances/{id}/events",
      `/api/v1/instances/${id}/events${query ? "?" + query : ""}`,
    );
    return body.events;
  }
}
