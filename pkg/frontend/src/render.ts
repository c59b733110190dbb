// Top-down world view and synthetic overhead-camera panel.

import { applyPose, detectionWorld, yawOf } from "./pose.js";
import type { PoseJson, Snapshot } from "./protocol.js";
import type { ViewModel } from "./viewmodel.js";

export interface Viewport {
  width: number;
  height: number;
  centerX: number; // world meters at the canvas center
  centerY: number;
  scale: number; // pixels per meter
}

/** World (x east, y north) to screen (x right, y down). */
export function worldToScreen(x: number, y: number, vp: Viewport): [number, number] {
  return [
    vp.width / 2 + (x - vp.centerX) * vp.scale,
    vp.height / 2 - (y - vp.centerY) * vp.scale,
  ];
}

/** Ground footprint center of the straight-down camera view. */
export function cameraGround(mav: PoseJson): [number, number] {
  return [mav.t[0], mav.t[1]];
}

/** Detection box corners (half-size hs) on the ground, in world coordinates. */
export function detectionBoxCorners(
  mavEst: PoseJson,
  relCamera: PoseJson,
  hs = 0.35,
): Array<[number, number]> {
  const target = detectionWorld(mavEst, relCamera);
  const locals: Array<[number, number, number]> = [
    [hs, hs, 0], [-hs, hs, 0], [-hs, -hs, 0], [hs, -hs, 0],
  ];
  return locals.map((p) => {
    const w = applyPose(target, p);
    return [w[0], w[1]];
  });
}

// The painter only needs the small slice of CanvasRenderingContext2D below,
// which lets tests drive it with a recording stub.
export interface Ctx2d {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  rect(x: number, y: number, w: number, h: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
  translate(x: number, y: number): void;
  rotate(rad: number): void;
  setLineDash(segments: number[]): void;
}

const COLORS = {
  background: "#10151c",
  grid: "#1e2733",
  home: "#d8b44a",
  ugv: "#4aa3d8",
  ugvSelected: "#7cd84a",
  mav: "#e8e8e8",
  estimate: "#888899",
  circle: "#7cd84a",
  setpoint: "#d84a7c",
  waypoint: "#d8854a",
  detection: "#39d353",
  stale: "rgba(16, 21, 28, 0.55)",
};

export const UGV_LENGTH = 0.6; // m, drawn footprint
export const UGV_WIDTH = 0.45;

function drawGrid(ctx: Ctx2d, vp: Viewport): void {
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, vp.width, vp.height);
  ctx.strokeStyle = COLORS.grid;
  ctx.lineWidth = 1;
  const span = vp.width / vp.scale / 2 + 1;
  const x0 = Math.floor(vp.centerX - span);
  const x1 = Math.ceil(vp.centerX + span);
  const yspan = vp.height / vp.scale / 2 + 1;
  const y0 = Math.floor(vp.centerY - yspan);
  const y1 = Math.ceil(vp.centerY + yspan);
  ctx.beginPath();
  for (let gx = x0; gx <= x1; gx++) {
    const [sx] = worldToScreen(gx, 0, vp);
    ctx.moveTo(sx, 0);
    ctx.lineTo(sx, vp.height);
  }
  for (let gy = y0; gy <= y1; gy++) {
    const [, sy] = worldToScreen(0, gy, vp);
    ctx.moveTo(0, sy);
    ctx.lineTo(vp.width, sy);
  }
  ctx.stroke();
}

function drawUgv(ctx: Ctx2d, vp: Viewport, x: number, y: number, heading: number,
                 selected: boolean): void {
  const [sx, sy] = worldToScreen(x, y, vp);
  ctx.save();
  ctx.translate(sx, sy);
  ctx.rotate(-heading);
  ctx.fillStyle = selected ? COLORS.ugvSelected : COLORS.ugv;
  const l = UGV_LENGTH * vp.scale;
  const w = UGV_WIDTH * vp.scale;
  ctx.fillRect(-l / 2, -w / 2, l, w);
  ctx.fillStyle = COLORS.background;
  ctx.beginPath();
  ctx.moveTo(l / 2, 0);
  ctx.lineTo(l / 5, -w / 4);
  ctx.lineTo(l / 5, w / 4);
  ctx.closePath();
  ctx.fill();
  ctx.restore();
}

function drawCircle(ctx: Ctx2d, vp: Viewport, x: number, y: number,
                    radiusMeters: number, color: string, dash: number[] = []): void {
  const [sx, sy] = worldToScreen(x, y, vp);
  ctx.strokeStyle = color;
  ctx.setLineDash(dash);
  ctx.beginPath();
  ctx.arc(sx, sy, radiusMeters * vp.scale, 0, Math.PI * 2);
  ctx.stroke();
  ctx.setLineDash([]);
}

function drawCross(ctx: Ctx2d, vp: Viewport, x: number, y: number,
                   color: string): void {
  const [sx, sy] = worldToScreen(x, y, vp);
  ctx.strokeStyle = color;
  ctx.beginPath();
  ctx.moveTo(sx - 6, sy);
  ctx.lineTo(sx + 6, sy);
  ctx.moveTo(sx, sy - 6);
  ctx.lineTo(sx, sy + 6);
  ctx.stroke();
}

export function drawWorld(ctx: Ctx2d, vm: ViewModel, vp: Viewport): void {
  drawGrid(ctx, vp);
  const snap = vm.latest;
  const hello = vm.hello;
  if (hello) {
    drawCircle(ctx, vp, hello.home[0], hello.home[1], 0.3, COLORS.home, [4, 3]);
    const [hx, hy] = worldToScreen(hello.home[0], hello.home[1], vp);
    ctx.fillStyle = COLORS.home;
    ctx.font = "11px monospace";
    ctx.fillText("home", hx + 8, hy - 6);
  }
  if (!snap) return;

  for (const [id, u] of Object.entries(snap.ugvs)) {
    drawUgv(ctx, vp, u.true[0], u.true[1], u.true[2], id === vm.selected);
    const [sx, sy] = worldToScreen(u.true[0], u.true[1], vp);
    ctx.fillStyle = "#c8d2dc";
    ctx.font = "11px monospace";
    ctx.fillText(id, sx + 10, sy + 14);
  }

  // tolerance circle around the hover point above the tracked target
  if (snap.phase.startsWith("tracking") && vm.hello) {
    const target = snap.phase.split(":")[1];
    const u = snap.ugvs[target];
    if (u) {
      const off = snap.offset;
      const c = Math.cos(u.true[2]);
      const s = Math.sin(u.true[2]);
      const ax = u.true[0] + c * off[0] - s * off[1];
      const ay = u.true[1] + s * off[0] + c * off[1];
      drawCircle(ctx, vp, ax, ay, vm.hello.r_max, COLORS.circle);
    }
  }

  // transfer waypoint and path
  if (snap.waypoint) {
    const [wx, wy] = snap.waypoint;
    drawCross(ctx, vp, wx, wy, COLORS.waypoint);
    const [mx, my] = worldToScreen(snap.mav.true.t[0], snap.mav.true.t[1], vp);
    const [sx, sy] = worldToScreen(wx, wy, vp);
    ctx.strokeStyle = COLORS.waypoint;
    ctx.setLineDash([6, 4]);
    ctx.beginPath();
    ctx.moveTo(mx, my);
    ctx.lineTo(sx, sy);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  drawCross(ctx, vp, snap.setpoint.p[0], snap.setpoint.p[1], COLORS.setpoint);

  // MAV: true position marker plus the drifting estimate ghost
  const [ex, ey] = worldToScreen(snap.mav.est.t[0], snap.mav.est.t[1], vp);
  ctx.strokeStyle = COLORS.estimate;
  ctx.beginPath();
  ctx.arc(ex, ey, 5, 0, Math.PI * 2);
  ctx.stroke();
  const [mx, my] = worldToScreen(snap.mav.true.t[0], snap.mav.true.t[1], vp);
  ctx.save();
  ctx.translate(mx, my);
  ctx.rotate(-snap.mav.yaw);
  ctx.strokeStyle = COLORS.mav;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(8, 0);
  ctx.lineTo(-6, 5);
  ctx.lineTo(-6, -5);
  ctx.closePath();
  ctx.stroke();
  ctx.restore();
}

/**
 * Synthetic overhead view: an orthographic crop of the ground around the
 * camera footprint, with the detection box overlaid when present.
 */
export function drawCameraPanel(ctx: Ctx2d, vm: ViewModel, width: number,
                                height: number): void {
  const snap = vm.latest;
  const span = 3.2; // meters across the panel, roughly the 2 m-altitude footprint
  const vp: Viewport = {
    width,
    height,
    centerX: 0,
    centerY: 0,
    scale: width / span,
  };
  if (snap) {
    [vp.centerX, vp.centerY] = cameraGround(snap.mav.true);
  }
  drawGrid(ctx, vp);
  if (!snap) return;

  for (const [id, u] of Object.entries(snap.ugvs)) {
    drawUgv(ctx, vp, u.true[0], u.true[1], u.true[2], id === vm.selected);
  }

  if (snap.detection) {
    const corners = detectionBoxCorners(snap.mav.est, snap.detection);
    ctx.strokeStyle = COLORS.detection;
    ctx.lineWidth = 2;
    ctx.beginPath();
    corners.forEach(([x, y], i) => {
      const [sx, sy] = worldToScreen(x, y, vp);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
    ctx.closePath();
    ctx.stroke();
    const target = detectionWorld(snap.mav.est, snap.detection);
    const yaw = yawOf(target);
    const [cx0, cy0] = worldToScreen(target.t[0], target.t[1], vp);
    const [cx1, cy1] = worldToScreen(
      target.t[0] + 0.45 * Math.cos(yaw),
      target.t[1] + 0.45 * Math.sin(yaw),
      vp,
    );
    ctx.beginPath();
    ctx.moveTo(cx0, cy0);
    ctx.lineTo(cx1, cy1);
    ctx.stroke();
  }

  // crosshair at the image center
  ctx.strokeStyle = "rgba(232,232,232,0.6)";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(width / 2 - 10, height / 2);
  ctx.lineTo(width / 2 + 10, height / 2);
  ctx.moveTo(width / 2, height / 2 - 10);
  ctx.lineTo(width / 2, height / 2 + 10);
  ctx.stroke();

  if (!snap.vis) {
    ctx.fillStyle = COLORS.stale;
    ctx.fillRect(0, 0, width, height);
    ctx.fillStyle = "#c8d2dc";
    ctx.font = "12px monospace";
    ctx.fillText("target not in view", 12, 20);
  }
}

export function describeReadouts(vm: ViewModel): string[] {
  const snap = vm.latest;
  const lines = [vm.statusLine()];
  if (!snap) return lines;
  lines.push(`t ${snap.t.toFixed(2)} s  phase ${snap.phase}`);
  if (snap.r_err !== null) {
    lines.push(`station error ${snap.r_err.toFixed(3)} m`);
  }
  const m = snap.metrics;
  lines.push(`transfers ${m.transfer_successes}/${m.transfer_attempts}  `
    + `mean arrival ${m.arrival_disp_mean.toFixed(3)} m`);
  lines.push(`stable ${snap.stable ? "yes" : "no"}  detections ${m.detections}`);
  if (vm.latencyMs !== null) {
    lines.push(`command latency ~${vm.latencyMs.toFixed(0)} ms`);
  }
  if (vm.lastRejection) {
    lines.push(`rejected: ${vm.lastRejection}`);
  }
  return lines;
}
