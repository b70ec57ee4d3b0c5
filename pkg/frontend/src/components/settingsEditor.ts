import { ApiClient, Finding } from "../api.js";

/**
 * Form over GET/PUT /api/settings. Server findings render inline at the
 * offending field; a 423 renders as a locked banner (settings are frozen
 * while a session is active).
 */
export class SettingsEditor {
  readonly el: HTMLElement;
  private form: HTMLElement;
  private banner: HTMLElement;
  private values: Record<string, string> = {};

  constructor(private api: ApiClient) {
    this.el = document.createElement("div");
    this.el.className = "settings-editor";
    this.banner = document.createElement("div");
    this.banner.className = "settings-banner";
    this.form = document.createElement("div");
    this.form.className = "settings-form";
    this.el.append(this.banner, this.form);
  }

  async load(): Promise<void> {
    const result = await this.api.getSettings();
    this.values = result.body.settings;
    this.render([]);
  }

  async save(): Promise<void> {
    for (const input of this.form.querySelectorAll<HTMLInputElement>("input[data-key]")) {
      this.values[input.dataset.key!] = input.value;
    }
    const result = await this.api.putSettings(this.values);
    if (result.status === 423) {
      this.setBanner("settings are locked while a session is active", "locked");
      return;
    }
    if (result.status === 422) {
      this.setBanner("settings were rejected", "error");
      this.render(result.body.report?.findings ?? []);
      return;
    }
    if (result.ok && result.body.settings) {
      this.values = result.body.settings;
      this.setBanner("saved", "ok");
      this.render([]);
    }
  }

  setLocked(locked: boolean): void {
    if (locked) {
      this.setBanner("settings are locked while a session is active", "locked");
    } else if (this.banner.classList.contains("locked")) {
      this.setBanner("", "");
    }
    for (const input of this.form.querySelectorAll<HTMLInputElement>("input[data-key]")) {
      input.disabled = locked;
    }
    const save = this.form.querySelector<HTMLButtonElement>("button.save");
    if (save) save.disabled = locked;
  }

  private setBanner(text: string, kind: string): void {
    this.banner.textContent = text;
    this.banner.className = `settings-banner ${kind}`.trim();
  }

  private render(findings: Finding[]): void {
    this.form.innerHTML = "";
    const bySubject = new Map<string, Finding[]>();
    for (const finding of findings) {
      const existing = bySubject.get(finding.subject) ?? [];
      existing.push(finding);
      bySubject.set(finding.subject, existing);
    }
    for (const [key, value] of Object.entries(this.values)) {
      const field = document.createElement("label");
      field.className = "settings-field";
      field.dataset.key = key;
      const caption = document.createElement("span");
      caption.textContent = key;
      const input = document.createElement("input");
      input.value = value;
      input.dataset.key = key;
      field.append(caption, input);
      for (const finding of bySubject.get(key) ?? []) {
        const note = document.createElement("span");
        note.className = "field-finding";
        note.textContent = `${finding.code}: ${finding.message}`;
        field.appendChild(note);
      }
      this.form.appendChild(field);
    }
    const save = document.createElement("button");
    save.className = "save";
    save.textContent = "save settings";
    save.onclick = () => void this.save();
    this.form.appendChild(save);
  }
}
