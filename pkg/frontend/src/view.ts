// DOM rendering: full re-render per state change (desk-scale rosters).

import type { RosterRow } from "./messages.js";
import { AlertItem, DashboardState, canEnd, canUnlock, sortedRoster } from "./store.js";

export interface ViewHandlers {
  onAction(studentId: string, action: "unlock" | "end"): void;
  onAcknowledge(alertId: string): void;
  onExpandImage(imageRef: string, img: HTMLImageElement): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

function fmtTime(tsMs: number | null): string {
  if (tsMs === null) {
    return "-";
  }
  return new Date(tsMs).toLocaleTimeString();
}

function stateLabel(state: RosterRow["state"]): string {
  return state.charAt(0).toUpperCase() + state.slice(1);
}

function renderRosterRow(doc: Document, row: RosterRow, handlers: ViewHandlers): HTMLTableRowElement {
  const tr = el(doc, "tr", { "data-testid": `roster-${row.student_id}` });
  tr.appendChild(el(doc, "td", {}, row.student_id));

  const badgeCell = el(doc, "td");
  badgeCell.appendChild(el(
    doc, "span",
    { class: `badge badge-${row.state}`, "data-testid": `badge-${row.student_id}` },
    stateLabel(row.state),
  ));
  if (row.no_face) {
    badgeCell.appendChild(el(doc, "span", { class: "noface", title: "no face detected" }, " no face"));
  }
  tr.appendChild(badgeCell);

  tr.appendChild(el(doc, "td", { "data-testid": `count-${row.student_id}` }, String(row.violation_count)));
  tr.appendChild(el(doc, "td", {}, row.last_p_abnormal === null ? "-" : row.last_p_abnormal.toFixed(3)));
  tr.appendChild(el(doc, "td", {}, fmtTime(row.last_verdict_ts_ms)));

  const actions = el(doc, "td");
  const unlock = el(doc, "button", { "data-testid": `unlock-${row.student_id}` }, "Unlock") as HTMLButtonElement;
  unlock.disabled = !canUnlock(row);
  unlock.addEventListener("click", () => handlers.onAction(row.student_id, "unlock"));
  const end = el(doc, "button", { "data-testid": `end-${row.student_id}` }, "End") as HTMLButtonElement;
  end.disabled = !canEnd(row);
  end.addEventListener("click", () => handlers.onAction(row.student_id, "end"));
  actions.appendChild(unlock);
  actions.appendChild(end);
  tr.appendChild(actions);
  return tr;
}

function renderAlert(doc: Document, alert: AlertItem, handlers: ViewHandlers): HTMLElement {
  const item = el(doc, "li", {
    class: alert.acknowledged ? "alert acked" : "alert",
    "data-testid": `alert-${alert.id}`,
  });
  item.appendChild(el(
    doc, "span", { class: "alert-text" },
    `${new Date(alert.ts_ms).toLocaleTimeString()} ${alert.student_id} ` +
    `violation #${alert.violation_count} (p=${alert.p_abnormal.toFixed(3)})`,
  ));
  if (!alert.acknowledged) {
    const ack = el(doc, "button", { "data-testid": `ack-${alert.id}` }, "Acknowledge");
    ack.addEventListener("click", () => handlers.onAcknowledge(alert.id));
    item.appendChild(ack);
  }
  if (alert.image_ref) {
    const show = el(doc, "button", { "data-testid": `image-${alert.id}` }, "Show capture");
    show.addEventListener("click", () => {
      // image fetch is lazy: only on expansion
      const img = el(doc, "img", { class: "capture", alt: `capture for ${alert.student_id}` });
      item.appendChild(img);
      show.remove();
      handlers.onExpandImage(alert.image_ref as string, img);
    });
    item.appendChild(show);
  }
  return item;
}

export function render(state: DashboardState, root: HTMLElement, handlers: ViewHandlers): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  const status = el(doc, "div", {
    class: `connection connection-${state.connection}`,
    "data-testid": "connection",
  }, state.connection);
  root.appendChild(status);

  if (state.lastError) {
    root.appendChild(el(doc, "div", { class: "error-banner", "data-testid": "error" }, state.lastError));
  }

  const rosterSection = el(doc, "section", { class: "roster" });
  rosterSection.appendChild(el(doc, "h2", {}, "Roster"));
  const table = el(doc, "table", { "data-testid": "roster" });
  const head = el(doc, "tr");
  for (const title of ["Student", "State", "Violations", "Last p(abnormal)", "Last seen", "Actions"]) {
    head.appendChild(el(doc, "th", {}, title));
  }
  table.appendChild(head);
  for (const row of sortedRoster(state)) {
    table.appendChild(renderRosterRow(doc, row, handlers));
  }
  rosterSection.appendChild(table);
  root.appendChild(rosterSection);

  const alertSection = el(doc, "section", { class: "alerts" });
  alertSection.appendChild(el(doc, "h2", {}, `Alerts (${state.alerts.length})`));
  const feed = el(doc, "ul", { "data-testid": "alert-feed" });
  for (const alert of state.alerts) {
    feed.appendChild(renderAlert(doc, alert, handlers));
  }
  alertSection.appendChild(feed);
  root.appendChild(alertSection);
}
