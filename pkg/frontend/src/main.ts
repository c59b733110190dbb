// Operator console wiring: canvases, keyboard teleop, mission buttons.

import { TelemetryClient } from "./client.js";
import type { Snapshot } from "./protocol.js";
import { describeReadouts, drawCameraPanel, drawWorld, Viewport } from "./render.js";
import { TeleopLoop } from "./teleop.js";
import { ViewModel } from "./viewmodel.js";

const worldCanvas = document.getElementById("world") as HTMLCanvasElement;
const cameraCanvas = document.getElementById("camera") as HTMLCanvasElement;
const statusEl = document.getElementById("status") as HTMLDivElement;
const readoutsEl = document.getElementById("readouts") as HTMLPreElement;
const buttonsEl = document.getElementById("buttons") as HTMLDivElement;
const bannerEl = document.getElementById("banner") as HTMLDivElement;
const rateEl = document.getElementById("rate") as HTMLSpanElement;

const params = new URLSearchParams(location.search);
const defaultUrl = `ws://${location.host || "127.0.0.1:8701"}/ws`;
const url = params.get("url") ?? defaultUrl;

const vm = new ViewModel();

const client = new TelemetryClient(url, {
  onHello: (hello) => {
    vm.applyHello(hello);
    buildButtons();
  },
  onSnapshot: (msg) => vm.applySnapshot(msg.payload as Snapshot),
  onState: (state) => {
    vm.setConnection(state);
    statusEl.textContent = vm.statusLine();
  },
  onVersionMismatch: () => {
    vm.versionMismatch = true;
    bannerEl.textContent = "protocol version mismatch - read-only";
    bannerEl.style.display = "block";
  },
  onRejected: (reason) => {
    vm.lastRejection = reason;
  },
  onMessage: (msg) => {
    if (msg.type === "pong" && typeof msg.payload === "number") {
      vm.noteLatency(msg.payload, performance.now());
    }
  },
});

const teleop = new TeleopLoop((drive) => {
  if (vm.selected !== null && vm.driving) {
    client.sendCommand({
      type: "drive",
      ugv: vm.selected,
      linear: drive.linear,
      angular: drive.angular,
    });
  }
});

window.addEventListener("keydown", (ev) => {
  if (ev.repeat) return;
  if (ev.code === "Tab") {
    vm.cycleSelection();
    buildButtons();
    ev.preventDefault();
    return;
  }
  if (teleop.keyDown(ev.code)) ev.preventDefault();
});
window.addEventListener("keyup", (ev) => teleop.keyUp(ev.code));

function buildButtons(): void {
  buttonsEl.textContent = "";
  for (const id of vm.hello?.ugvs ?? []) {
    const b = document.createElement("button");
    b.textContent = vm.selected === id ? `[ ${id} ]` : id;
    b.title = `select ${id} / request overhead view`;
    b.onclick = () => {
      vm.selectUgv(id);
      client.sendCommand({ type: "transfer", to: id });
      buildButtons();
    };
    buttonsEl.appendChild(b);
  }
  const home = document.createElement("button");
  home.textContent = "return home";
  home.onclick = () => client.sendCommand({ type: "return_home" });
  buttonsEl.appendChild(home);

  const offsets: Array<[string, [number, number, number]]> = [
    ["offset +x", [0.3, 0, 0]],
    ["offset 0", [0, 0, 0]],
  ];
  for (const [label, v] of offsets) {
    const b = document.createElement("button");
    b.textContent = label;
    b.onclick = () => client.sendCommand({ type: "set_offset", v });
    buttonsEl.appendChild(b);
  }
}

const worldCtx = worldCanvas.getContext("2d")!;
const cameraCtx = cameraCanvas.getContext("2d")!;

let framesDrawn = 0;
let lastRateStamp = performance.now();

function frame(): void {
  const vp: Viewport = {
    width: worldCanvas.width,
    height: worldCanvas.height,
    centerX: 2.0,
    centerY: 0.0,
    scale: 60,
  };
  drawWorld(worldCtx, vm, vp);
  drawCameraPanel(cameraCtx, vm, cameraCanvas.width, cameraCanvas.height);
  readoutsEl.textContent = describeReadouts(vm).join("\n");
  framesDrawn += 1;
  const now = performance.now();
  if (now - lastRateStamp >= 1000) {
    rateEl.textContent = `${framesDrawn} fps / ${vm.snapshotsReceived} snaps`;
    framesDrawn = 0;
    lastRateStamp = now;
  }
  requestAnimationFrame(frame);
}

setInterval(() => client.ping(performance.now()), 2000);

client.connect();
teleop.start();
requestAnimationFrame(frame);
