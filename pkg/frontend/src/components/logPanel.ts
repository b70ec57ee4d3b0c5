import { ApiClient, LogEventPayload } from "../api.js";

const MAX_LINES = 2000;

/**
 * Scrolling live log view. Each line is tinted by the color the server
 * sent with the event; gap and end-of-stream markers render distinctly.
 * A dropped stream shows a visible marker and reconnects while active.
 */
export class LogPanel {
  readonly el: HTMLElement;
  private list: HTMLElement;
  private filter: string | null = null;
  private controller: AbortController | null = null;
  private running = false;

  constructor(
    private api: ApiClient,
    private follow = true,
    private reconnectDelayMs = 500,
  ) {
    this.el = document.createElement("div");
    this.el.className = "log-panel";
    this.list = document.createElement("div");
    this.list.className = "log-lines";
    this.el.appendChild(this.list);
  }

  setFilter(service: string | null): void {
    this.filter = service;
    this.list.innerHTML = "";
    if (this.running) {
      this.restart();
    }
  }

  start(): void {
    if (this.running) return;
    this.running = true;
    void this.loop();
  }

  stop(): void {
    this.running = false;
    this.controller?.abort();
    this.controller = null;
  }

  lineCount(): number {
    return this.list.querySelectorAll(".log-line").length;
  }

  private restart(): void {
    this.controller?.abort();
    this.controller = null;
  }

  private async loop(): Promise<void> {
    while (this.running) {
      this.controller = new AbortController();
      try {
        await this.api.streamLogs(
          { service: this.filter ?? undefined, follow: this.follow },
          (event) => this.append(event),
          this.controller.signal,
        );
        if (!this.follow) return; // snapshot streams end normally
        this.marker("stream ended");
      } catch {
        if (!this.running) return;
        this.marker("stream dropped, reconnecting");
      }
      await new Promise((resolve) => setTimeout(resolve, this.reconnectDelayMs));
    }
  }

  append(event: LogEventPayload): void {
    if (event.channel === "gap") {
      this.marker("events dropped (slow consumer)");
      return;
    }
    if (event.channel === "eof") {
      this.marker(`${event.service}: end of stream`);
      return;
    }
    const line = document.createElement("div");
    line.className = `log-line log-${event.color} channel-${event.channel}`;
    line.dataset.service = event.service;
    line.dataset.color = event.color;
    line.textContent = `[${event.service}] ${event.line}`;
    this.push(line);
  }

  private marker(text: string): void {
    const line = document.createElement("div");
    line.className = "log-marker";
    line.textContent = `── ${text} ──`;
    this.push(line);
  }

  private push(line: HTMLElement): void {
    this.list.appendChild(line);
    while (this.list.children.length > MAX_LINES) {
      this.list.removeChild(this.list.firstChild!);
    }
    this.list.scrollTop = this.list.scrollHeight;
  }
}
