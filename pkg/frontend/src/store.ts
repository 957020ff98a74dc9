// Pure dashboard state: a reducer over the snapshot + ordered message stream,
// so replaying recorded messages reproduces the same rendered roster.

import type { AlertMsg, RosterRow, ServerMessage, SessionState } from "./messages.js";

export type Connection = "connecting" | "live" | "reconnecting";

export interface AlertItem extends AlertMsg {
  id: string;
  acknowledged: boolean; // local-only; alerts are never auto-dismissed
}

export interface DashboardState {
  connection: Connection;
  roster: Record<string, RosterRow>;
  alerts: AlertItem[]; // ordered by ts_ms descending
  lastError: string | null;
}

export const initialState: DashboardState = {
  connection: "connecting",
  roster: {},
  alerts: [],
  lastError: null,
};

function alertId(msg: AlertMsg): string {
  return `${msg.student_id}:${msg.violation_count}:${msg.ts_ms}`;
}

function placeholderRow(studentId: string, state: SessionState): RosterRow {
  return {
    student_id: studentId,
    state,
    violation_count: 0,
    last_verdict_ts_ms: null,
    last_p_abnormal: null,
    no_face: false,
  };
}

export function reduce(state: DashboardState, msg: ServerMessage): DashboardState {
  switch (msg.type) {
    case "roster": {
      const roster: Record<string, RosterRow> = {};
      for (const row of msg.students) {
        roster[row.student_id] = row;
      }
      return { ...state, roster };
    }
    case "alert": {
      const id = alertId(msg);
      if (state.alerts.some((a) => a.id === id)) {
        return state;
      }
      const item: AlertItem = { ...msg, id, acknowledged: false };
      const alerts = [...state.alerts, item].sort((a, b) => b.ts_ms - a.ts_ms);
      return { ...state, alerts };
    }
    case "state_change": {
      const existing = state.roster[msg.student_id] ?? placeholderRow(msg.student_id, msg.state);
      return {
        ...state,
        roster: { ...state.roster, [msg.student_id]: { ...existing, state: msg.state } },
      };
    }
    case "ack": {
      const existing = state.roster[msg.student_id];
      if (!existing) {
        return state;
      }
      return {
        ...state,
        roster: { ...state.roster, [msg.student_id]: { ...existing, state: msg.state } },
        lastError: null,
      };
    }
    case "error":
      return { ...state, lastError: msg.message };
  }
}

export function withConnection(state: DashboardState, connection: Connection): DashboardState {
  return { ...state, connection };
}

export function acknowledgeAlert(state: DashboardState, id: string): DashboardState {
  return {
    ...state,
    alerts: state.alerts.map((a) => (a.id === id ? { ...a, acknowledged: true } : a)),
  };
}

// Action gating mirrors the server's transition rules so no enabled button
// can produce an InvalidTransition.
export function canUnlock(row: RosterRow): boolean {
  return row.state === "locked";
}

export function canEnd(row: RosterRow): boolean {
  return row.state !== "ended";
}

export function sortedRoster(state: DashboardState): RosterRow[] {
  return Object.values(state.roster).sort((a, b) => a.student_id.localeCompare(b.student_id));
}
