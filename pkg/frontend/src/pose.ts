// Minimal rigid-transform math for projecting detections into the views.
// Quaternions are scalar-first [w, x, y, z], matching the wire format.

import type { PoseJson } from "./protocol.js";

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export function quatMultiply(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  const [w, ux, uy, uz] = q;
  const [vx, vy, vz] = v;
  const tx = 2 * (uy * vz - uz * vy);
  const ty = 2 * (uz * vx - ux * vz);
  const tz = 2 * (ux * vy - uy * vx);
  return [
    vx + w * tx + uy * tz - uz * ty,
    vy + w * ty + uz * tx - ux * tz,
    vz + w * tz + ux * ty - uy * tx,
  ];
}

export function composePose(a: PoseJson, b: PoseJson): PoseJson {
  const t = quatRotate(a.q, b.t);
  return {
    t: [a.t[0] + t[0], a.t[1] + t[1], a.t[2] + t[2]],
    q: quatMultiply(a.q, b.q),
  };
}

export function applyPose(p: PoseJson, v: Vec3): Vec3 {
  const r = quatRotate(p.q, v);
  return [p.t[0] + r[0], p.t[1] + r[1], p.t[2] + r[2]];
}

export function yawOf(p: PoseJson): number {
  const [w, x, y, z] = p.q;
  return Math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z));
}

// Fixed downward-camera mounting: a pure 180-degree roll of the body frame.
export const CAMERA_EXTRINSIC: PoseJson = { t: [0, 0, 0], q: [0, 1, 0, 0] };

/** World pose of the detected target: est MAV pose -> camera -> detection. */
export function detectionWorld(mavEst: PoseJson, relCamera: PoseJson): PoseJson {
  return composePose(mavEst, composePose(CAMERA_EXTRINSIC, relCamera));
}
