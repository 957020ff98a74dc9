// Wire types for the proctor channel (one JSON object per message, newline-terminated).

export type SessionState = "monitoring" | "locked" | "ended";

export interface RosterRow {
  student_id: string;
  state: SessionState;
  violation_count: number;
  last_verdict_ts_ms: number | null;
  last_p_abnormal: number | null;
  no_face: boolean;
  dropped?: number;
}

export interface RosterMsg {
  type: "roster";
  room_id?: string;
  students: RosterRow[];
}

export interface AlertMsg {
  type: "alert";
  room_id?: string;
  student_id: string;
  ts_ms: number;
  p_abnormal: number;
  violation_count: number;
  image_ref: string | null;
}

export interface StateChangeMsg {
  type: "state_change";
  student_id: string;
  state: SessionState;
}

export interface AckMsg {
  type: "ack";
  student_id: string;
  action: "unlock" | "end";
  state: SessionState;
}

export interface ErrorMsg {
  type: "error";
  code: string;
  message: string;
  student_id?: string;
  action?: string;
}

export type ServerMessage = RosterMsg | AlertMsg | StateChangeMsg | AckMsg | ErrorMsg;

export function parseServerMessage(raw: string): ServerMessage | null {
  let value: unknown;
  try {
    value = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof value !== "object" || value === null || typeof (value as any).type !== "string") {
    return null;
  }
  const type = (value as any).type;
  if (["roster", "alert", "state_change", "ack", "error"].includes(type)) {
    return value as ServerMessage;
  }
  return null;
}
