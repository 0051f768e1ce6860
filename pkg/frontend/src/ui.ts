// DOM rendering for the console page. Pure presentation: everything shown
// comes from ConsoleState; edited fields are visually distinct from
// extracted ones.

import type { ConsoleState } from "./state.js";
import { recommendationBars } from "./state.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function render(state: ConsoleState): void {
  el("session-label").textContent = state.sessionId
    ? `session ${state.sessionId}${state.confirmed ? " (locked)" : ""}`
    : "no active session";

  const banner = el("banner");
  banner.textContent = state.banner ?? "";
  banner.style.display = state.banner ? "block" : "none";

  const bars = recommendationBars(state.recommendation);
  el("orders-panel").innerHTML = bars.length
    ? bars
        .map(
          (bar) =>
            `<div class="order-row"><span class="order-name">${escapeHtml(bar.order)}</span>` +
            `<div class="bar" style="width:${bar.widthPercent}%"></div>` +
            `<span class="order-confidence">${bar.confidence.toFixed(3)}</span></div>`,
        )
        .join("")
    : "<em>no recommendation yet</em>";

  const entries = Object.entries(state.fields);
  el("form-panel").innerHTML = entries.length
    ? entries
        .map(
          ([name, view]) =>
            `<tr class="${view.provenance}"><td>${escapeHtml(name)}</td>` +
            `<td><input data-field="${escapeHtml(name)}" value="${escapeHtml(view.value)}"` +
            `${state.confirmed ? " disabled" : ""}/></td>` +
            `<td class="provenance">${view.provenance}</td></tr>`,
        )
        .join("")
    : "<tr><td colspan='3'><em>nothing extracted yet</em></td></tr>";

  el("alerts-panel").innerHTML = state.alerts.length
    ? state.alerts
        .map(
          (alert) =>
            `<li class="alert-${alert.kind}">${escapeHtml(alert.text)} ` +
            (alert.kind === "reminder"
              ? `<button data-ack="${escapeHtml(alert.id)}">acknowledge</button>`
              : "") +
            `</li>`,
        )
        .join("")
    : "<li><em>no alerts</em></li>";

  el("feed-panel").innerHTML = state.feed
    .slice(-30)
    .map(
      (event) =>
        `<li>[${event.time.toFixed(0)}s] <strong>${escapeHtml(event.kind)}</strong> ` +
        `${escapeHtml(JSON.stringify(event.payload)).slice(0, 160)}</li>`,
    )
    .join("");

  const report = el("epcr-panel");
  report.textContent = state.epcrText ?? "";
  report.style.display = state.epcrText ? "block" : "none";
}
