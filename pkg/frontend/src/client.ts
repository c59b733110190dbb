// Telemetry session: connect, resubscribe with backoff, send commands.

import {
  Command,
  Hello,
  ServerMessage,
  parseServerMessage,
  wrapCommand,
  wrapPing,
} from "./protocol.js";

// The subset of the WebSocket API the client touches; satisfied by both the
// browser WebSocket and the `ws` package (used in tests).
export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export type ConnectionState =
  | { kind: "connecting" }
  | { kind: "open"; driver: boolean; readOnly: boolean }
  | { kind: "retrying"; inMs: number; attempt: number }
  | { kind: "closed" };

export interface ClientHandlers {
  onHello?(hello: Hello): void;
  onSnapshot?(snap: ServerMessage & { type: "snapshot" }): void;
  onMessage?(msg: ServerMessage): void;
  onState?(state: ConnectionState): void;
  onVersionMismatch?(): void;
  onRejected?(reason: string): void;
}

const BACKOFF_MS = [500, 1000, 2000, 4000, 8000];

export class TelemetryClient {
  driver = false;
  readOnly = false;
  hello: Hello | null = null;

  private ws: WsLike | null = null;
  private closedByUs = false;
  private attempt = 0;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private handlers: ClientHandlers = {},
    private wsFactory: WsFactory = (u) => new WebSocket(u) as unknown as WsLike,
  ) {}

  connect(): void {
    this.closedByUs = false;
    this.open();
  }

  close(): void {
    this.closedByUs = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
    this.ws?.close();
    this.ws = null;
    this.handlers.onState?.({ kind: "closed" });
  }

  get connected(): boolean {
    return this.ws !== null && this.hello !== null;
  }

  sendCommand(cmd: Command): boolean {
    if (this.ws === null || this.readOnly) {
      return false;
    }
    this.ws.send(wrapCommand(cmd));
    return true;
  }

  ping(payload: unknown): void {
    this.ws?.send(wrapPing(payload));
  }

  private open(): void {
    this.handlers.onState?.({ kind: "connecting" });
    let ws: WsLike;
    try {
      ws = this.wsFactory(this.url);
    } catch {
      this.scheduleRetry();
      return;
    }
    this.ws = ws;
    ws.onopen = () => {
      this.attempt = 0;
    };
    ws.onmessage = (ev) => this.handleMessage(String(ev.data));
    ws.onerror = () => {
      /* the close handler drives the retry */
    };
    ws.onclose = () => {
      this.ws = null;
      this.hello = null;
      if (!this.closedByUs) {
        this.scheduleRetry();
      }
    };
  }

  private handleMessage(raw: string): void {
    const parsed = parseServerMessage(raw);
    if (!parsed.ok) {
      if (parsed.reason === "version-mismatch") {
        // keep rendering what we can, but never send commands
        this.readOnly = true;
        this.handlers.onVersionMismatch?.();
      }
      return;
    }
    const msg = parsed.msg;
    this.handlers.onMessage?.(msg);
    switch (msg.type) {
      case "hello": {
        this.hello = msg.payload;
        this.driver = msg.payload.driver;
        this.readOnly = !msg.payload.driver;
        this.handlers.onHello?.(msg.payload);
        this.handlers.onState?.({
          kind: "open",
          driver: this.driver,
          readOnly: this.readOnly,
        });
        break;
      }
      case "snapshot":
        this.handlers.onSnapshot?.(msg);
        break;
      case "error":
        this.handlers.onRejected?.(msg.payload.reason);
        break;
      default:
        break;
    }
  }

  private scheduleRetry(): void {
    const delay = BACKOFF_MS[Math.min(this.attempt, BACKOFF_MS.length - 1)];
    this.attempt += 1;
    this.handlers.onState?.({ kind: "retrying", inMs: delay, attempt: this.attempt });
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      if (!this.closedByUs) {
        this.open();
      }
    }, delay);
  }
}
