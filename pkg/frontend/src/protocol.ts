// Wire protocol types, mirroring docs/protocol.md on the service side.

export const PROTOCOL_VERSION = 1;
export const SNAPSHOT_SCHEMA = 1;

export interface PoseJson {
  t: [number, number, number];
  q: [number, number, number, number]; // scalar-first [w, x, y, z]
}

export interface MavView {
  true: PoseJson;
  est: PoseJson;
  v: [number, number, number];
  roll: number;
  pitch: number;
  yaw: number;
}

export interface UgvView {
  true: [number, number, number]; // x, y, heading
  slam: PoseJson;
  cmd: [number, number]; // linear, angular as applied
}

export interface MetricsView {
  transfer_attempts: number;
  transfer_successes: number;
  arrival_disp_mean: number;
  detections: number;
}

export interface Snapshot {
  schema: number;
  t: number;
  tick: number;
  phase: string;
  mav: MavView;
  ugvs: Record<string, UgvView>;
  setpoint: { p: [number, number, number]; yaw: number };
  offset: [number, number, number];
  stable: boolean;
  degraded: boolean;
  vis: boolean;
  detection: PoseJson | null;
  r_err: number | null;
  waypoint?: [number, number, number];
  metrics: MetricsView;
}

export interface Hello {
  scenario: string;
  seed: number;
  rate: number;
  ugvs: string[];
  r_max: number;
  hover_height: number;
  home: [number, number, number];
  driver: boolean;
}

export type ServerMessage =
  | { type: "hello"; payload: Hello }
  | { type: "snapshot"; payload: Snapshot }
  | { type: "ack"; payload: Command }
  | { type: "error"; payload: { reason: string } }
  | { type: "pong"; payload: unknown };

export type Command =
  | { type: "drive"; ugv: string; linear: number; angular: number }
  | { type: "transfer"; to: string }
  | { type: "return_home" }
  | { type: "set_offset"; v: [number, number, number] };

export type ParseResult =
  | { ok: true; msg: ServerMessage }
  | { ok: false; reason: "bad-json" | "version-mismatch" | "unknown-type" };

const KNOWN_TYPES = new Set(["hello", "snapshot", "ack", "error", "pong"]);

export function parseServerMessage(raw: string): ParseResult {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return { ok: false, reason: "bad-json" };
  }
  if (typeof obj !== "object" || obj === null) {
    return { ok: false, reason: "bad-json" };
  }
  const env = obj as { v?: unknown; type?: unknown; payload?: unknown };
  if (env.v !== PROTOCOL_VERSION) {
    return { ok: false, reason: "version-mismatch" };
  }
  if (typeof env.type !== "string" || !KNOWN_TYPES.has(env.type)) {
    return { ok: false, reason: "unknown-type" };
  }
  return { ok: true, msg: { type: env.type, payload: env.payload } as ServerMessage };
}

export function wrapCommand(cmd: Command): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type: "command", payload: cmd });
}

export function wrapPing(payload: unknown): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type: "ping", payload });
}
