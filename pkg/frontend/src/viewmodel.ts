// Console state: everything the renderer needs, nothing the server owns.

import type { ConnectionState } from "./client.js";
import { Hello, SNAPSHOT_SCHEMA, Snapshot } from "./protocol.js";

export class ViewModel {
  hello: Hello | null = null;
  latest: Snapshot | null = null;
  selected: string | null = null;
  connection: ConnectionState = { kind: "connecting" };
  versionMismatch = false;
  lastRejection: string | null = null;
  latencyMs: number | null = null;
  snapshotsReceived = 0;
  staleSnapshots = 0;

  applyHello(hello: Hello): void {
    this.hello = hello;
    if (this.selected === null || !hello.ugvs.includes(this.selected)) {
      this.selected = hello.ugvs[0] ?? null;
    }
  }

  /** Accepts only schema-matched snapshots; returns whether it was applied. */
  applySnapshot(snap: Snapshot): boolean {
    if (snap.schema !== SNAPSHOT_SCHEMA) {
      this.staleSnapshots += 1;
      return false;
    }
    this.latest = snap;
    this.snapshotsReceived += 1;
    return true;
  }

  setConnection(state: ConnectionState): void {
    this.connection = state;
  }

  selectUgv(id: string): void {
    if (this.hello?.ugvs.includes(id)) {
      this.selected = id;
    }
  }

  cycleSelection(): void {
    const ids = this.hello?.ugvs ?? [];
    if (ids.length === 0 || this.selected === null) {
      this.selected = ids[0] ?? null;
      return;
    }
    this.selected = ids[(ids.indexOf(this.selected) + 1) % ids.length];
  }

  noteLatency(sentAtMs: number, nowMs: number): void {
    this.latencyMs = nowMs - sentAtMs;
  }

  get driving(): boolean {
    return this.connection.kind === "open" && this.connection.driver
      && !this.versionMismatch;
  }

  statusLine(): string {
    const c = this.connection;
    if (this.versionMismatch) return "version mismatch - read-only";
    switch (c.kind) {
      case "connecting":
        return "connecting...";
      case "open":
        return c.driver ? "driving" : "viewing (read-only)";
      case "retrying":
        return `reconnecting in ${(c.inMs / 1000).toFixed(1)} s (attempt ${c.attempt})`;
      case "closed":
        return "disconnected";
    }
  }
}
