// Typed client for the controller's HTTP API. The console is a pure client:
// every state transition goes through these documented endpoints and nothing
// else, which the tests verify by recording outbound requests.

export interface StackEntry {
  name: string;
  generation: string;
  description: string;
  service_count: number;
  findings: number;
}

export interface ServiceHealth {
  service: string;
  state: string;
  host: string;
  since: number | null;
  exit_code: number | null;
  color: string;
}

export interface SessionInfo {
  id: number;
  stack: string;
  state: string;
  started_at: number;
  error: string | null;
}

export interface StatusPayload {
  stack: string | null;
  aggregate: string;
  taken_at: number;
  services: ServiceHealth[];
  session: SessionInfo | null;
}

export interface LogEventPayload {
  ts: number;
  service: string;
  line: string;
  channel: string;
  color: string;
}

export interface Finding {
  severity: string;
  code: string;
  subject: string;
  message: string;
}

export interface ApiResult<T> {
  ok: boolean;
  status: number;
  body: T;
}

type FetchLike = typeof fetch;

/** Incremental parser for `event:`/`data:` server-sent-event frames. */
export class SseParser {
  private buffer = "";

  push(chunk: string): LogEventPayload[] {
    this.buffer += chunk;
    const events: LogEventPayload[] = [];
    let split = this.buffer.indexOf("\n\n");
    while (split !== -1) {
      const frame = this.buffer.slice(0, split);
      this.buffer = this.buffer.slice(split + 2);
      for (const line of frame.split("\n")) {
        if (line.startsWith("data: ")) {
          events.push(JSON.parse(line.slice("data: ".length)));
        }
      }
      split = this.buffer.indexOf("\n\n");
    }
    return events;
  }
}

export class ApiClient {
  readonly requests: string[] = [];

  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = fetch,
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<ApiResult<T>> {
    this.requests.push(`${method} ${path}`);
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = (await response.json()) as T;
    return { ok: response.ok, status: response.status, body: payload };
  }

  listStacks() {
    return this.call<{ stacks: StackEntry[]; findings: Finding[] }>("GET", "/api/stacks");
  }

  getStack(name: string) {
    return this.call<{ manifest: unknown; report: { findings: Finding[] } }>(
      "GET",
      `/api/stacks/${encodeURIComponent(name)}`,
    );
  }

  startStack(name: string, policy?: "reject" | "replace") {
    return this.call<{ session?: SessionInfo; code?: string; message?: string }>(
      "POST",
      `/api/stacks/${encodeURIComponent(name)}/start`,
      policy ? { policy } : {},
    );
  }

  stopStack(name: string) {
    return this.call<{ stopped?: boolean; code?: string }>(
      "POST",
      `/api/stacks/${encodeURIComponent(name)}/stop`,
    );
  }

  getStatus() {
    return this.call<StatusPayload>("GET", "/api/status");
  }

  getSettings() {
    return this.call<{ settings: Record<string, string>; warnings: string[] }>(
      "GET",
      "/api/settings",
    );
  }

  putSettings(settings: Record<string, string>) {
    return this.call<{
      settings?: Record<string, string>;
      code?: string;
      report?: { findings: Finding[] };
    }>("PUT", "/api/settings", { settings });
  }

  /**
   * Subscribe to the log event stream. Resolves when the stream ends;
   * rejects on transport errors so the caller can show a reconnect marker.
   */
  async streamLogs(
    params: { service?: string; follow?: boolean },
    onEvent: (event: LogEventPayload) => void,
    signal?: AbortSignal,
  ): Promise<void> {
    const query = new URLSearchParams();
    if (params.service) query.set("service", params.service);
    if (params.follow) query.set("follow", "true");
    const path = `/api/logs${query.size ? "?" + query.toString() : ""}`;
    this.requests.push(`GET ${path}`);
    const response = await this.fetchFn(this.baseUrl + path, { signal });
    if (!response.ok || !response.body) {
      throw new Error(`log stream failed: ${response.status}`);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return;
      for (const event of parser.push(decoder.decode(value, { stream: true }))) {
        onEvent(event);
      }
    }
  }
}
