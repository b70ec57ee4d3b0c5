import { describe, expect, it } from "vitest";

import { ApiClient, SseParser, StatusPayload } from "../src/api.js";
import { startDisabledReason } from "../src/components/stackList.js";

function status(stack: string | null, state: string): StatusPayload {
  return {
    stack,
    aggregate: "green",
    taken_at: 0,
    services: [],
    session: stack
      ? { id: 1, stack, state, started_at: 0, error: null }
      : null,
  };
}

const row = {
  name: "stack-b",
  generation: "5g-sa",
  description: "",
  service_count: 3,
  findings: 0,
};

describe("SseParser", () => {
  it("parses complete frames and keeps partial ones buffered", () => {
    const parser = new SseParser();
    const first = parser.push('event: log\ndata: {"ts":1,"service":"amf","line":"a","channel":"out","color":"green"}\n\nevent: log\ndata: {"ts":2,"ser');
    expect(first.map((e) => e.ts)).toEqual([1]);
    const second = parser.push('vice":"amf","line":"b","channel":"out","color":"green"}\n\n');
    expect(second.map((e) => e.line)).toEqual(["b"]);
  });

  it("handles many frames in one chunk", () => {
    const parser = new SseParser();
    const chunk = Array.from({ length: 5 }, (_, i) =>
      `event: log\ndata: {"ts":${i},"service":"s","line":"l${i}","channel":"out","color":"gray"}\n\n`,
    ).join("");
    expect(parser.push(chunk)).toHaveLength(5);
  });
});

describe("startDisabledReason", () => {
  it("enables start when idle", () => {
    expect(startDisabledReason(row, status(null, ""))).toBeNull();
    expect(startDisabledReason(row, status("stack-a", "stopped"))).toBeNull();
  });

  it("disables other stacks with the already-active hint", () => {
    const reason = startDisabledReason(row, status("stack-a", "running"));
    expect(reason).toContain("STACK_ALREADY_ACTIVE");
    expect(reason).toContain("stack-a");
  });

  it("disables the active stack's own start without the conflict hint", () => {
    const reason = startDisabledReason(row, status("stack-b", "running"));
    expect(reason).toBe("already running");
  });
});

describe("LogPanel markers", () => {
  it("renders gap and eof markers distinctly from log lines", async () => {
    const { LogPanel } = await import("../src/components/logPanel.js");
    const panel = new LogPanel(new ApiClient("http://x"), false);
    document.body.appendChild(panel.el);
    panel.append({ ts: 1, service: "amf", line: "hello", channel: "out", color: "green" });
    panel.append({ ts: 2, service: "", line: "", channel: "gap", color: "gray" });
    panel.append({ ts: 3, service: "amf", line: "", channel: "eof", color: "gray" });
    const lines = document.querySelectorAll(".log-line");
    const markers = document.querySelectorAll(".log-marker");
    expect(lines).toHaveLength(1);
    expect(markers).toHaveLength(2);
    expect(markers[0].textContent).toContain("dropped");
    expect(markers[1].textContent).toContain("end of stream");
  });

  it("shows a reconnect marker when the stream drops mid-session", async () => {
    const { LogPanel } = await import("../src/components/logPanel.js");
    let calls = 0;
    const flakyFetch = (async () => {
      calls += 1;
      if (calls === 1) throw new Error("connection reset");
      // Second attempt: a stream that never yields, so the panel stays subscribed.
      return new Response(new ReadableStream(), { status: 200 });
    }) as typeof fetch;
    const panel = new LogPanel(new ApiClient("http://x", flakyFetch), true, 10);
    document.body.appendChild(panel.el);
    panel.start();
    await new Promise((resolve) => setTimeout(resolve, 100));
    panel.stop();
    const markers = Array.from(document.querySelectorAll(".log-marker"));
    expect(markers.some((m) => m.textContent?.includes("reconnecting"))).toBe(true);
    expect(calls).toBeGreaterThanOrEqual(2);
  });
});

describe("ApiClient request recording", () => {
  it("records every outbound request path", async () => {
    const seen: string[] = [];
    const fakeFetch = (async (url: RequestInfo | URL) => {
      seen.push(String(url));
      return new Response(JSON.stringify({ stacks: [], findings: [] }), { status: 200 });
    }) as typeof fetch;
    const client = new ApiClient("http://x", fakeFetch);
    await client.listStacks();
    await client.getStatus().catch(() => undefined);
    expect(client.requests).toEqual(["GET /api/stacks", "GET /api/status"]);
    expect(seen.every((u) => u.includes("/api/"))).toBe(true);
  });
});
