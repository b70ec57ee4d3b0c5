import { StackEntry, StatusPayload } from "../api.js";

export interface StackListHandlers {
  onStart: (name: string) => void;
  onStop: (name: string) => void;
}

const ACTIVE_STATES = ["starting", "running", "stopping"];

export function sessionIsActive(status: StatusPayload | null): boolean {
  return !!status?.session && ACTIVE_STATES.includes(status.session.state);
}

/**
 * Why a row's start control is disabled, or null if it may start.
 * Mirrors the server's 409 semantics under the default policy; the UI
 * never decides more than the API would.
 */
export function startDisabledReason(row: StackEntry, status: StatusPayload | null): string | null {
  if (!sessionIsActive(status)) return null;
  if (status!.session!.stack === row.name) return "already running";
  return `STACK_ALREADY_ACTIVE: ${status!.session!.stack} is active`;
}

export function renderStackList(
  el: HTMLElement,
  stacks: StackEntry[],
  status: StatusPayload | null,
  handlers: StackListHandlers,
): void {
  el.innerHTML = "";
  if (stacks.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No stacks in the catalog.";
    el.appendChild(empty);
    return;
  }
  for (const stack of stacks) {
    const row = document.createElement("div");
    row.className = "stack-row";
    row.dataset.stack = stack.name;

    const info = document.createElement("div");
    info.className = "stack-info";
    const title = document.createElement("span");
    title.className = "stack-name";
    title.textContent = stack.name;
    const meta = document.createElement("span");
    meta.className = "stack-meta";
    meta.textContent = `${stack.generation} · ${stack.service_count} services`;
    const description = document.createElement("span");
    description.className = "stack-description";
    description.textContent = stack.description;
    const validation = document.createElement("span");
    validation.className = stack.findings === 0 ? "validation ok" : "validation bad";
    validation.textContent = stack.findings === 0 ? "valid" : `${stack.findings} findings`;
    info.append(title, meta, validation, description);

    const controls = document.createElement("div");
    controls.className = "stack-controls";
    const start = document.createElement("button");
    start.className = "start";
    start.textContent = "start";
    const reason = startDisabledReason(stack, status);
    if (reason !== null) {
      start.disabled = true;
      start.title = reason;
    } else {
      start.onclick = () => handlers.onStart(stack.name);
    }
    const stop = document.createElement("button");
    stop.className = "stop";
    stop.textContent = "stop";
    const isActiveRow = sessionIsActive(status) && status!.session!.stack === stack.name;
    stop.disabled = !isActiveRow;
    if (isActiveRow) {
      stop.onclick = () => handlers.onStop(stack.name);
    }
    controls.append(start, stop);

    row.append(info, controls);
    el.appendChild(row);
  }
}
