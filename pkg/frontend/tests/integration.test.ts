// @vitest-environment happy-dom
//
// Release criterion, against a real local server: a scripted room (join,
// 4 violations, lock) renders the alert in the feed within 500 ms of server
// emit, and the unlock action returns the roster badge to Monitoring within
// 1 s.

import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import readline from "node:readline";

import WebSocket from "ws";
import { afterAll, beforeAll, describe, expect, it, vi } from "vitest";

import { DashboardClient } from "../src/client.js";
import { render, ViewHandlers } from "../src/view.js";

const PYTHON = process.env.PYTHON ?? "python3";
const STUDENT_TOKEN = "s-tok";
const PROCTOR_TOKEN = "p-tok";

let serverProc: ChildProcess;
let tcpPort: number;
let httpBase: string;

async function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function waitFor(cond: () => boolean, what: string, timeoutMs = 10_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (cond()) {
      return;
    }
    await sleep(5);
  }
  throw new Error(`timed out waiting for ${what}`);
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "exammon-dash-"));
  const modelPath = join(dir, "model.json");
  // frames in this scenario are no-face sentinels (forced abnormal), so a
  // minimally-trained model is fine
  execFileSync(PYTHON, [
    "-m", "exammon", "train", "--synth-n", "60", "--epochs", "2", "--out", modelPath,
  ], { stdio: "pipe" });
  const tokensPath = join(dir, "tokens.json");
  writeFileSync(tokensPath, JSON.stringify({ student: STUDENT_TOKEN, proctor: PROCTOR_TOKEN }));

  serverProc = spawn(PYTHON, [
    "-u", "-m", "exammon", "serve",
    "--listen", "127.0.0.1:0", "--http", "127.0.0.1:0",
    "--model", modelPath, "--tokens", tokensPath,
    "--data-dir", join(dir, "data"),
    "--window-frames", "2", "--cooldown-ms", "0", "--lock-threshold", "3",
  ], { stdio: ["ignore", "pipe", "pipe"] });

  const rl = readline.createInterface({ input: serverProc.stdout! });
  const first: string = await new Promise((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("server did not start")), 30_000);
    rl.once("line", (line) => {
      clearTimeout(timer);
      resolve(line);
    });
  });
  const info = JSON.parse(first);
  tcpPort = Number(info.tcp.split(":").pop());
  httpBase = info.http;
});

afterAll(() => {
  serverProc?.kill("SIGKILL");
});

interface Student {
  socket: net.Socket;
  sendFrame(seq: number): void;
  close(): void;
}

async function joinStudent(id: string): Promise<Student> {
  const socket = net.connect({ host: "127.0.0.1", port: tcpPort });
  await new Promise<void>((resolve, reject) => {
    socket.once("connect", resolve);
    socket.once("error", reject);
  });
  socket.on("data", () => undefined); // drain verdict replies
  socket.write(JSON.stringify({
    type: "hello", role: "student", token: STUDENT_TOKEN, room_id: "default", id,
  }) + "\n");

  const zeros = JSON.stringify(Array.from({ length: 478 }, () => [0.0, 0.0]));
  return {
    socket,
    sendFrame(seq: number) {
      socket.write(
        `{"type":"frame","seq":${seq},"ts_ms":${Date.now()},"width":640,"height":480,` +
        `"landmarks":${zeros}}\n`,
      );
    },
    close() {
      socket.destroy();
    },
  };
}

describe("dashboard against a live server", () => {
  it("renders alerts within 500 ms of emit and unlocks within 1 s", async () => {
    const client = new DashboardClient({
      httpBase, roomId: "default", token: PROCTOR_TOKEN,
      webSocketImpl: WebSocket as unknown as typeof globalThis.WebSocket,
    });
    const root = document.createElement("div");
    document.body.appendChild(root);
    const handlers: ViewHandlers = {
      onAction: (sid, action) => client.sendAction(sid, action),
      onAcknowledge: (id) => client.acknowledge(id),
      onExpandImage: vi.fn(),
    };
    client.onChange((state) => render(state, root, handlers));

    try {
      await client.hydrate();
      client.connect();
      await waitFor(() => client.state.connection === "live", "live connection");

      const student = await joinStudent("stu-1");
      await waitFor(() => client.state.roster["stu-1"] !== undefined, "student joins roster");

      // 8 no-face frames with W=2, cooldown 0: violations 1..4, lock on the 4th
      for (let seq = 1; seq <= 8; seq += 1) {
        student.sendFrame(seq);
        await sleep(15);
      }

      await waitFor(() => client.state.alerts.length >= 1, "first alert");
      const firstAlert = client.state.alerts[client.state.alerts.length - 1]!;
      const renderLagMs = Date.now() - firstAlert.ts_ms;
      expect(renderLagMs).toBeLessThanOrEqual(500);
      expect(
        root.querySelector(`[data-testid="alert-${firstAlert.id}"]`),
        "alert item is in the rendered feed",
      ).not.toBeNull();

      await waitFor(() => client.state.alerts.length >= 4, "all four violation alerts");
      await waitFor(() => client.state.roster["stu-1"]!.state === "locked", "locked roster state");
      expect(root.querySelector('[data-testid="badge-stu-1"]')!.textContent).toBe("Locked");
      const unlockButton = root.querySelector('[data-testid="unlock-stu-1"]') as HTMLButtonElement;
      expect(unlockButton.disabled).toBe(false);

      const unlockStarted = Date.now();
      client.sendAction("stu-1", "unlock");
      await waitFor(() => client.state.roster["stu-1"]!.state === "monitoring", "unlock reflected");
      expect(Date.now() - unlockStarted).toBeLessThanOrEqual(1000);
      expect(root.querySelector('[data-testid="badge-stu-1"]')!.textContent).toBe("Monitoring");
      await waitFor(
        () => client.state.roster["stu-1"]!.violation_count === 0,
        "refreshed roster shows the reset count",
      );

      console.log(
        `PASS: alert rendered ${renderLagMs} ms after emit; ` +
        `unlock reflected in ${Date.now() - unlockStarted} ms`,
      );
      student.close();
    } finally {
      client.close();
    }
  });

  it("rejects a bad proctor token at hydrate", async () => {
    const client = new DashboardClient({
      httpBase, roomId: "default", token: "wrong",
      webSocketImpl: WebSocket as unknown as typeof globalThis.WebSocket,
    });
    await expect(client.hydrate()).rejects.toThrow(/proctor/);
  });
});
