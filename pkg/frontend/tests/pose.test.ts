import { describe, expect, it } from "vitest";

import {
  CAMERA_EXTRINSIC,
  applyPose,
  composePose,
  detectionWorld,
  quatRotate,
  yawOf,
} from "../src/pose.js";
import type { PoseJson } from "../src/protocol.js";

const IDENT: PoseJson = { t: [0, 0, 0], q: [1, 0, 0, 0] };

// one frame logged by the simulator: the console-side projection must land on
// the same world pose the backend computed through its transform chain
const FRAME = {
  mav_est: {
    t: [1.3539399338336648, -0.46798020016566616, 2.1],
    q: [0.9371177113398754, 0.022747651586074495, -0.018224052925166555,
        0.34779422556364153],
  } as PoseJson,
  rel_camera: {
    t: [0.31933127309336407, 0.03123767041122152, 2.1475203234605793],
    q: [-0.011971204136258002, -0.9927704371271691, 0.11643576516100632,
        -0.02657559085380318],
  } as PoseJson,
  expected_target_world: {
    t: [1.6555649074052567, -0.1649564287758618, -0.028847285033620107],
    q: [0.8906037049094129, 0, 0, 0.45478021153259035],
  } as PoseJson,
  expected_target_yaw: 0.9442508252803534,
};

describe("pose math", () => {
  it("identity composition is a no-op", () => {
    const p: PoseJson = { t: [1, 2, 3], q: [0.5, 0.5, 0.5, 0.5] };
    const out = composePose(IDENT, p);
    expect(out.t).toEqual(p.t);
    expect(out.q).toEqual(p.q);
  });

  it("rotation by a quarter turn about z maps x to y", () => {
    const s = Math.SQRT1_2;
    const v = quatRotate([s, 0, 0, s], [1, 0, 0]);
    expect(v[0]).toBeCloseTo(0, 12);
    expect(v[1]).toBeCloseTo(1, 12);
    expect(v[2]).toBeCloseTo(0, 12);
  });

  it("applyPose rotates then translates", () => {
    const s = Math.SQRT1_2;
    const p: PoseJson = { t: [1, 0, 0], q: [s, 0, 0, s] };
    const out = applyPose(p, [1, 0, 0]);
    expect(out[0]).toBeCloseTo(1, 12);
    expect(out[1]).toBeCloseTo(1, 12);
  });

  it("the camera extrinsic points the view axis down", () => {
    const down = quatRotate(CAMERA_EXTRINSIC.q, [0, 0, 1]);
    expect(down[0]).toBeCloseTo(0, 12);
    expect(down[1]).toBeCloseTo(0, 12);
    expect(down[2]).toBeCloseTo(-1, 12);
  });

  it("yawOf reads the heading of a pure yaw", () => {
    const half = 0.35;
    const p: PoseJson = { t: [0, 0, 0], q: [Math.cos(half), 0, 0, Math.sin(half)] };
    expect(yawOf(p)).toBeCloseTo(0.7, 12);
  });

  it("reproduces the backend transform chain on a logged frame", () => {
    const target = detectionWorld(FRAME.mav_est, FRAME.rel_camera);
    for (let i = 0; i < 3; i++) {
      expect(target.t[i]).toBeCloseTo(FRAME.expected_target_world.t[i], 9);
    }
    expect(yawOf(target)).toBeCloseTo(FRAME.expected_target_yaw, 9);
    // quaternions may differ by sign; compare |dot| to 1
    const dot = target.q.reduce(
      (acc, v, i) => acc + v * FRAME.expected_target_world.q[i], 0);
    expect(Math.abs(dot)).toBeCloseTo(1, 9);
  });
});
