import { StatusPayload } from "../api.js";

// Colors shown are exactly the colors received; the panel computes nothing.
export function renderStatusPanel(el: HTMLElement, status: StatusPayload | null): void {
  el.innerHTML = "";
  const badge = document.createElement("div");
  const aggregate = status?.aggregate ?? "gray";
  badge.className = `aggregate health-${aggregate}`;
  badge.textContent = status?.stack ? `${status.stack}: ${aggregate}` : "no active stack";
  el.appendChild(badge);

  if (!status || status.services.length === 0) return;
  const table = document.createElement("table");
  table.className = "service-table";
  for (const service of status.services) {
    const row = table.insertRow();
    row.className = `health-${service.color}`;
    row.insertCell().textContent = service.service;
    row.insertCell().textContent = service.state;
    row.insertCell().textContent = service.host;
    row.insertCell().textContent = service.color;
  }
  el.appendChild(table);
}
