// Typed client over the server's HTTP API. The console is a pure API
// client: every mutation it performs goes through these calls.

import type {
  ActivitySnapshot,
  ApiErrorBody,
  Binding,
  InstanceSummary,
  ToolDescriptor,
  Violation,
} from "./types.js";

export class ApiError extends Error {
  readonly kind: string;
  readonly status: number;
  readonly violations: Violation[];

  constructor(status: number, body: ApiErrorBody | null, fallback: string) {
    const kind = body?.error?.kind ?? "HttpError";
    super(body?.error?.detail ?? fallback);
    this.kind = kind;
    this.status = status;
    this.violations = body?.error?.violations ?? [];
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  if (resp.status === 204) {
    return undefined as T;
  }
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    body = null;
  }
  if (!resp.ok) {
    throw new ApiError(resp.status, body as ApiErrorBody | null, `HTTP ${resp.status} for ${url}`);
  }
  return body as T;
}

export class ConsoleApi {
  constructor(readonly baseUrl: string) {}

  listInstances(): Promise<{ instances: InstanceSummary[] }> {
    return request(`${this.baseUrl}/instances`);
  }

  snapshot(instanceId: string): Promise<ActivitySnapshot> {
    return request(`${this.baseUrl}/instances/${instanceId}`);
  }

  describeTool(url: string): Promise<ToolDescriptor> {
    return request(`${this.baseUrl}/tools?url=${encodeURIComponent(url)}`);
  }

  createInstance(definition: unknown): Promise<{ instance_id: string }> {
    return request(`${this.baseUrl}/instances`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(definition),
    });
  }

  addBinding(instanceId: string, binding: Binding): Promise<{ binding_id: string }> {
    return request(`${this.baseUrl}/instances/${instanceId}/bindings`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(binding),
    });
  }

  removeBinding(instanceId: string, bindingId: string): Promise<void> {
    return request(`${this.baseUrl}/instances/${instanceId}/bindings/${bindingId}`, {
      method: "DELETE",
    });
  }

  streamUrl(instanceId: string, fromIdx?: number): string {
    const suffix = fromIdx === undefined ? "" : `?from=${fromIdx}`;
    return `${this.baseUrl}/instances/${instanceId}/stream${suffix}`;
  }
}
