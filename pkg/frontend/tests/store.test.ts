import { describe, expect, it } from "vitest";

import type { AlertMsg, RosterRow, ServerMessage } from "../src/messages.js";
import { parseServerMessage } from "../src/messages.js";
import {
  acknowledgeAlert,
  canEnd,
  canUnlock,
  initialState,
  reduce,
  sortedRoster,
} from "../src/store.js";

function row(overrides: Partial<RosterRow> = {}): RosterRow {
  return {
    student_id: "alice",
    state: "monitoring",
    violation_count: 0,
    last_verdict_ts_ms: null,
    last_p_abnormal: null,
    no_face: false,
    ...overrides,
  };
}

function alert(overrides: Partial<AlertMsg> = {}): AlertMsg {
  return {
    type: "alert",
    student_id: "alice",
    ts_ms: 1000,
    p_abnormal: 0.9,
    violation_count: 1,
    image_ref: null,
    ...overrides,
  };
}

describe("reduce", () => {
  it("hydrates the roster from a roster message", () => {
    const state = reduce(initialState, {
      type: "roster",
      students: [row(), row({ student_id: "bob", state: "locked", violation_count: 4 })],
    });
    expect(Object.keys(state.roster)).toEqual(["alice", "bob"]);
    expect(state.roster["bob"]!.state).toBe("locked");
  });

  it("keeps the alert feed ordered by ts descending", () => {
    let state = initialState;
    state = reduce(state, alert({ ts_ms: 1000, violation_count: 1 }));
    state = reduce(state, alert({ ts_ms: 3000, violation_count: 3 }));
    state = reduce(state, alert({ ts_ms: 2000, violation_count: 2 }));
    expect(state.alerts.map((a) => a.ts_ms)).toEqual([3000, 2000, 1000]);
  });

  it("deduplicates alerts (one item per violation)", () => {
    let state = reduce(initialState, alert());
    state = reduce(state, alert());
    expect(state.alerts).toHaveLength(1);
  });

  it("flips roster badges on state_change, even for unseen students", () => {
    let state = reduce(initialState, { type: "roster", students: [row()] });
    state = reduce(state, { type: "state_change", student_id: "alice", state: "locked" });
    expect(state.roster["alice"]!.state).toBe("locked");
    state = reduce(state, { type: "state_change", student_id: "ghost", state: "monitoring" });
    expect(state.roster["ghost"]!.state).toBe("monitoring");
  });

  it("applies ack state and clears the error banner", () => {
    let state = reduce(initialState, { type: "roster", students: [row({ state: "locked" })] });
    state = reduce(state, { type: "error", code: "x", message: "boom" });
    expect(state.lastError).toBe("boom");
    state = reduce(state, { type: "ack", student_id: "alice", action: "unlock", state: "monitoring" });
    expect(state.roster["alice"]!.state).toBe("monitoring");
    expect(state.lastError).toBeNull();
  });

  it("is replay-deterministic: same message stream, same state", () => {
    const stream: ServerMessage[] = [
      { type: "roster", students: [row(), row({ student_id: "bob" })] },
      alert({ ts_ms: 5 }),
      { type: "state_change", student_id: "bob", state: "locked" },
      alert({ student_id: "bob", ts_ms: 9, violation_count: 4 }),
      { type: "ack", student_id: "bob", action: "unlock", state: "monitoring" },
    ];
    const a = stream.reduce(reduce, initialState);
    const b = stream.reduce(reduce, initialState);
    expect(a).toEqual(b);
    expect(a.alerts.map((x) => x.id)).toEqual(b.alerts.map((x) => x.id));
  });

  it("acknowledgement is local-only and never removes alerts", () => {
    let state = reduce(initialState, alert());
    state = acknowledgeAlert(state, state.alerts[0]!.id);
    expect(state.alerts).toHaveLength(1);
    expect(state.alerts[0]!.acknowledged).toBe(true);
  });
});

describe("action gating", () => {
  it("unlock is enabled only while locked", () => {
    expect(canUnlock(row({ state: "locked" }))).toBe(true);
    expect(canUnlock(row({ state: "monitoring" }))).toBe(false);
    expect(canUnlock(row({ state: "ended" }))).toBe(false);
  });

  it("end is enabled until the session has ended", () => {
    expect(canEnd(row({ state: "monitoring" }))).toBe(true);
    expect(canEnd(row({ state: "locked" }))).toBe(true);
    expect(canEnd(row({ state: "ended" }))).toBe(false);
  });
});

describe("parseServerMessage", () => {
  it("accepts known message types with trailing newline", () => {
    const msg = parseServerMessage('{"type":"state_change","student_id":"a","state":"locked"}\n');
    expect(msg).not.toBeNull();
    expect(msg!.type).toBe("state_change");
  });

  it("rejects junk", () => {
    expect(parseServerMessage("not json")).toBeNull();
    expect(parseServerMessage('{"type":"wat"}')).toBeNull();
    expect(parseServerMessage("42")).toBeNull();
  });
});

describe("sortedRoster", () => {
  it("orders rows by student id", () => {
    let state = reduce(initialState, {
      type: "roster",
      students: [row({ student_id: "zed" }), row({ student_id: "amy" })],
    });
    expect(sortedRoster(state).map((r) => r.student_id)).toEqual(["amy", "zed"]);
  });
});
