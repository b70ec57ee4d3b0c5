import { ApiClient, StackEntry, StatusPayload } from "./api.js";
import { LogPanel } from "./components/logPanel.js";
import { SettingsEditor } from "./components/settingsEditor.js";
import { renderStackList, sessionIsActive } from "./components/stackList.js";
import { renderStatusPanel } from "./components/statusPanel.js";

const POLL_INTERVAL_MS = 1000;

export class Console {
  readonly api: ApiClient;
  readonly logPanel: LogPanel;
  readonly settings: SettingsEditor;
  private stacks: StackEntry[] = [];
  private status: StatusPayload | null = null;
  private stacksEl: HTMLElement;
  private statusEl: HTMLElement;
  private bannerEl: HTMLElement;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(root: HTMLElement, baseUrl = "") {
    this.api = new ApiClient(baseUrl);
    this.bannerEl = document.createElement("div");
    this.bannerEl.className = "api-banner";
    this.statusEl = document.createElement("section");
    this.statusEl.id = "status";
    this.stacksEl = document.createElement("section");
    this.stacksEl.id = "stacks";
    this.logPanel = new LogPanel(this.api);
    this.settings = new SettingsEditor(this.api);

    const header = document.createElement("h1");
    header.textContent = "mobile-network lab console";
    root.append(header, this.bannerEl, this.statusEl, this.stacksEl, this.logPanel.el, this.settings.el);
  }

  async bootstrap(): Promise<void> {
    try {
      const listing = await this.api.listStacks();
      this.stacks = listing.body.stacks;
      await this.settings.load();
      this.bannerEl.textContent = "";
      this.bannerEl.className = "api-banner";
    } catch {
      // No stale controls while the API is away: render the banner and retry.
      this.bannerEl.textContent = "API unreachable, retrying";
      this.bannerEl.className = "api-banner error";
      setTimeout(() => void this.bootstrap(), POLL_INTERVAL_MS);
      return;
    }
    await this.refresh();
    this.timer = setInterval(() => void this.refresh(), POLL_INTERVAL_MS);
  }

  shutdown(): void {
    if (this.timer) clearInterval(this.timer);
    this.logPanel.stop();
  }

  async refresh(): Promise<void> {
    try {
      this.status = (await this.api.getStatus()).body;
      this.bannerEl.textContent = "";
      this.bannerEl.className = "api-banner";
    } catch {
      this.bannerEl.textContent = "API unreachable, retrying";
      this.bannerEl.className = "api-banner error";
      return;
    }
    this.render();
  }

  private render(): void {
    renderStatusPanel(this.statusEl, this.status);
    renderStackList(this.stacksEl, this.stacks, this.status, {
      onStart: (name) => void this.start(name),
      onStop: (name) => void this.stop(name),
    });
    this.settings.setLocked(sessionIsActive(this.status));
  }

  async start(name: string): Promise<void> {
    const result = await this.api.startStack(name);
    if (result.ok) {
      this.logPanel.start();
    }
    await this.refresh();
  }

  async stop(name: string): Promise<void> {
    this.logPanel.stop();
    await this.api.stopStack(name);
    await this.refresh();
  }
}

declare global {
  interface Window {
    labConsole?: Console;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = new Console(document.getElementById("app")!);
  window.labConsole = app;
  void app.bootstrap();
}
