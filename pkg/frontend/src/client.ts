// Server connection: snapshot hydration over HTTP, then the live proctor
// channel over WebSocket with visible reconnect state and backoff.

import { parseServerMessage } from "./messages.js";
import {
  DashboardState,
  initialState,
  reduce,
  withConnection,
} from "./store.js";

export interface ClientConfig {
  httpBase: string; // e.g. http://127.0.0.1:7461
  roomId: string;
  token: string;
  id?: string;
  webSocketImpl?: typeof WebSocket;
  fetchImpl?: typeof fetch;
  reconnectBaseMs?: number;
  reconnectMaxMs?: number;
}

type Listener = (state: DashboardState) => void;

export class DashboardClient {
  state: DashboardState = initialState;
  private cfg: Required<Pick<ClientConfig, "httpBase" | "roomId" | "token">> & ClientConfig;
  private ws: WebSocket | null = null;
  private listeners = new Set<Listener>();
  private closed = false;
  private attempt = 0;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(cfg: ClientConfig) {
    this.cfg = { id: "dashboard", reconnectBaseMs: 500, reconnectMaxMs: 10_000, ...cfg };
  }

  onChange(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private setState(state: DashboardState): void {
    this.state = state;
    for (const listener of this.listeners) {
      listener(state);
    }
  }

  private get fetchImpl(): typeof fetch {
    return this.cfg.fetchImpl ?? fetch;
  }

  async hydrate(): Promise<void> {
    const url = `${this.cfg.httpBase}/rooms/${encodeURIComponent(this.cfg.roomId)}/snapshot` +
      `?token=${encodeURIComponent(this.cfg.token)}`;
    const resp = await this.fetchImpl(url);
    if (resp.status === 401) {
      throw new Error("token does not authorize the proctor role");
    }
    if (!resp.ok) {
      throw new Error(`snapshot failed: HTTP ${resp.status}`);
    }
    const body = await resp.json();
    this.setState(reduce(this.state, { type: "roster", students: body.students ?? [] }));
  }

  connect(): void {
    if (this.closed) {
      return;
    }
    const impl = this.cfg.webSocketImpl ?? WebSocket;
    const wsBase = this.cfg.httpBase.replace(/^http/, "ws");
    const url = `${wsBase}/rooms/${encodeURIComponent(this.cfg.roomId)}/ws` +
      `?token=${encodeURIComponent(this.cfg.token)}&id=${encodeURIComponent(this.cfg.id ?? "dashboard")}`;
    const ws = new impl(url);
    this.ws = ws;

    ws.onopen = () => {
      this.attempt = 0;
      this.setState(withConnection(this.state, "live"));
    };
    ws.onmessage = (event: MessageEvent) => {
      const raw = typeof event.data === "string" ? event.data : String(event.data);
      this.dispatchRaw(raw);
    };
    ws.onclose = () => {
      if (this.closed) {
        return;
      }
      this.setState(withConnection(this.state, "reconnecting"));
      const delay = Math.min(
        (this.cfg.reconnectBaseMs ?? 500) * 2 ** this.attempt,
        this.cfg.reconnectMaxMs ?? 10_000,
      );
      this.attempt += 1;
      this.reconnectTimer = setTimeout(() => this.connect(), delay);
    };
    ws.onerror = () => {
      // onclose follows and owns the retry
    };
  }

  dispatchRaw(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) {
      return;
    }
    this.setState(reduce(this.state, msg));
    if (msg.type === "state_change" || msg.type === "ack") {
      // states flip instantly; counters need a fresh snapshot
      this.requestRoster();
    }
  }

  requestRoster(): void {
    if (this.ws && this.ws.readyState === 1) {
      this.ws.send(JSON.stringify({ type: "snapshot" }));
    }
  }

  sendAction(studentId: string, action: "unlock" | "end"): void {
    if (this.ws && this.ws.readyState === 1) {
      this.ws.send(JSON.stringify({ type: "action", student_id: studentId, action }));
    }
  }

  acknowledge(alertId: string): void {
    this.setState({
      ...this.state,
      alerts: this.state.alerts.map((a) => (a.id === alertId ? { ...a, acknowledged: true } : a)),
    });
  }

  async fetchAlertImage(imageRef: string): Promise<ArrayBuffer> {
    const url = `${this.cfg.httpBase}/rooms/${encodeURIComponent(this.cfg.roomId)}/blobs/` +
      `${encodeURIComponent(imageRef)}?token=${encodeURIComponent(this.cfg.token)}`;
    const resp = await this.fetchImpl(url);
    if (!resp.ok) {
      throw new Error(`image fetch failed: HTTP ${resp.status}`);
    }
    return resp.arrayBuffer();
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
    }
    this.ws?.close();
  }
}
