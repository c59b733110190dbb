import { describe, expect, it } from "vitest";

import type { Hello, Snapshot } from "../src/protocol.js";
import { describeReadouts, detectionBoxCorners, drawWorld, drawCameraPanel, worldToScreen } from "../src/render.js";
import { ViewModel } from "../src/viewmodel.js";

const HELLO: Hello = {
  scenario: "t", seed: 0, rate: 20, ugvs: ["ugv0", "ugv1"],
  r_max: 0.2, hover_height: 2.0, home: [0, -1, 0], driver: true,
};

function snapshot(tick: number, extra: Partial<Snapshot> = {}): Snapshot {
  return {
    schema: 1, t: tick * 0.05, tick, phase: "tracking:ugv0",
    mav: {
      true: { t: [0, 0, 2], q: [1, 0, 0, 0] },
      est: { t: [0.05, 0, 2], q: [1, 0, 0, 0] },
      v: [0, 0, 0], roll: 0, pitch: 0, yaw: 0,
    },
    ugvs: {
      ugv0: { true: [0, 0, 0], slam: { t: [0, 0, 0], q: [1, 0, 0, 0] }, cmd: [0, 0] },
      ugv1: { true: [4, 0, 0], slam: { t: [4, 0, 0], q: [1, 0, 0, 0] }, cmd: [0, 0] },
    },
    setpoint: { p: [0, 0, 2], yaw: 0 },
    offset: [0, 0, 0], stable: true, degraded: false, vis: true,
    detection: { t: [0, 0, 2], q: [0, 1, 0, 0] }, r_err: 0.04,
    metrics: { transfer_attempts: 1, transfer_successes: 1,
               arrival_disp_mean: 0.1, detections: 40 },
    ...extra,
  };
}

describe("view model", () => {
  it("selects the first vehicle on hello and cycles", () => {
    const vm = new ViewModel();
    vm.applyHello(HELLO);
    expect(vm.selected).toBe("ugv0");
    vm.cycleSelection();
    expect(vm.selected).toBe("ugv1");
    vm.cycleSelection();
    expect(vm.selected).toBe("ugv0");
    vm.selectUgv("ghost");
    expect(vm.selected).toBe("ugv0");
  });

  it("renders only schema-matched snapshots", () => {
    const vm = new ViewModel();
    expect(vm.applySnapshot(snapshot(1))).toBe(true);
    expect(vm.applySnapshot({ ...snapshot(2), schema: 2 })).toBe(false);
    expect(vm.latest?.tick).toBe(1);
    expect(vm.staleSnapshots).toBe(1);
  });

  it("reports connection status lines", () => {
    const vm = new ViewModel();
    expect(vm.statusLine()).toBe("connecting...");
    vm.setConnection({ kind: "open", driver: true, readOnly: false });
    expect(vm.statusLine()).toBe("driving");
    expect(vm.driving).toBe(true);
    vm.setConnection({ kind: "open", driver: false, readOnly: true });
    expect(vm.statusLine()).toBe("viewing (read-only)");
    vm.setConnection({ kind: "retrying", inMs: 1500, attempt: 2 });
    expect(vm.statusLine()).toContain("reconnecting in 1.5 s");
    vm.versionMismatch = true;
    expect(vm.statusLine()).toContain("read-only");
    expect(vm.driving).toBe(false);
  });

  it("tracks latency from ping round trips", () => {
    const vm = new ViewModel();
    vm.noteLatency(100, 137.5);
    expect(vm.latencyMs).toBe(37.5);
  });
});

class RecordingCtx {
  ops: string[] = [];
  fillStyle = "";
  strokeStyle = "";
  lineWidth = 1;
  font = "";
  globalAlpha = 1;
  beginPath() { this.ops.push("beginPath"); }
  moveTo() { this.ops.push("moveTo"); }
  lineTo() { this.ops.push("lineTo"); }
  arc() { this.ops.push("arc"); }
  rect() { this.ops.push("rect"); }
  closePath() { this.ops.push("closePath"); }
  stroke() { this.ops.push("stroke"); }
  fill() { this.ops.push("fill"); }
  fillRect() { this.ops.push("fillRect"); }
  strokeRect() { this.ops.push("strokeRect"); }
  clearRect() { this.ops.push("clearRect"); }
  fillText(text: string) { this.ops.push(`text:${text}`); }
  save() { this.ops.push("save"); }
  restore() { this.ops.push("restore"); }
  translate() { this.ops.push("translate"); }
  rotate() { this.ops.push("rotate"); }
  setLineDash() { this.ops.push("setLineDash"); }
}

describe("rendering", () => {
  it("world-to-screen flips y and scales around the center", () => {
    const vp = { width: 640, height: 480, centerX: 2, centerY: 0, scale: 60 };
    expect(worldToScreen(2, 0, vp)).toEqual([320, 240]);
    expect(worldToScreen(3, 1, vp)).toEqual([380, 180]);
  });

  it("detection box corners form a square around the detected target", () => {
    const mavEst = { t: [0, 0, 2] as [number, number, number],
                     q: [1, 0, 0, 0] as [number, number, number, number] };
    const rel = { t: [0, 0, 2] as [number, number, number],
                  q: [0, 1, 0, 0] as [number, number, number, number] };
    const corners = detectionBoxCorners(mavEst, rel, 0.5);
    expect(corners.length).toBe(4);
    for (const [x, y] of corners) {
      expect(Math.abs(Math.abs(x) - 0.5)).toBeLessThan(1e-9);
      expect(Math.abs(Math.abs(y) - 0.5)).toBeLessThan(1e-9);
    }
  });

  it("draws the tolerance circle while tracking and the box when detecting", () => {
    const vm = new ViewModel();
    vm.applyHello(HELLO);
    vm.applySnapshot(snapshot(5));
    const world = new RecordingCtx();
    drawWorld(world, vm, { width: 640, height: 480, centerX: 0, centerY: 0, scale: 50 });
    expect(world.ops.filter((op) => op === "arc").length).toBeGreaterThanOrEqual(2);
    const panel = new RecordingCtx();
    drawCameraPanel(panel, vm, 360, 360);
    expect(panel.ops).toContain("closePath");
  });

  it("draws the waypoint path during transfers", () => {
    const vm = new ViewModel();
    vm.applyHello(HELLO);
    vm.applySnapshot(snapshot(9, {
      phase: "transfer:ugv0->ugv1",
      waypoint: [4, 0, 2.5],
      detection: null,
      r_err: null,
    }));
    const ctx = new RecordingCtx();
    drawWorld(ctx, vm, { width: 640, height: 480, centerX: 0, centerY: 0, scale: 50 });
    expect(ctx.ops.filter((op) => op === "setLineDash").length).toBeGreaterThan(1);
  });

  it("readouts include phase, station error, and transfers", () => {
    const vm = new ViewModel();
    vm.setConnection({ kind: "open", driver: true, readOnly: false });
    vm.applyHello(HELLO);
    vm.applySnapshot(snapshot(11));
    const lines = describeReadouts(vm).join("\n");
    expect(lines).toContain("tracking:ugv0");
    expect(lines).toContain("station error 0.040 m");
    expect(lines).toContain("transfers 1/1");
  });
});
