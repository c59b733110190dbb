// Keyboard teleoperation: held keys -> drive commands at a fixed rate.

export const FORWARD_SPEED = 0.3; // m/s, the vehicles' nominal operating speed
export const TURN_RATE = 0.8; // rad/s

export interface DriveState {
  linear: number;
  angular: number;
}

const FORWARD = new Set(["KeyW", "ArrowUp"]);
const BACK = new Set(["KeyS", "ArrowDown"]);
const LEFT = new Set(["KeyA", "ArrowLeft"]);
const RIGHT = new Set(["KeyD", "ArrowRight"]);

export function driveFromKeys(held: ReadonlySet<string>): DriveState {
  let linear = 0;
  let angular = 0;
  for (const code of held) {
    if (FORWARD.has(code)) linear += FORWARD_SPEED;
    else if (BACK.has(code)) linear -= FORWARD_SPEED;
    else if (LEFT.has(code)) angular += TURN_RATE;
    else if (RIGHT.has(code)) angular -= TURN_RATE;
  }
  return {
    linear: Math.max(-FORWARD_SPEED, Math.min(FORWARD_SPEED, linear)),
    angular: Math.max(-TURN_RATE, Math.min(TURN_RATE, angular)),
  };
}

/**
 * Emits the current drive state at `rateHz` while any mapped key is held;
 * after release it emits one zero command and then stays silent.
 */
export class TeleopLoop {
  private held = new Set<string>();
  private timer: ReturnType<typeof setInterval> | null = null;
  private lastWasZero = true;

  constructor(
    private send: (drive: DriveState) => void,
    private rateHz = 10,
  ) {}

  start(): void {
    if (this.timer === null) {
      this.timer = setInterval(() => this.tick(), 1000 / this.rateHz);
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    this.held.clear();
  }

  keyDown(code: string): boolean {
    if (!FORWARD.has(code) && !BACK.has(code) && !LEFT.has(code) && !RIGHT.has(code)) {
      return false;
    }
    this.held.add(code);
    return true;
  }

  keyUp(code: string): void {
    this.held.delete(code);
  }

  tick(): void {
    const drive = driveFromKeys(this.held);
    const isZero = drive.linear === 0 && drive.angular === 0;
    if (!isZero) {
      this.send(drive);
      this.lastWasZero = false;
    } else if (!this.lastWasZero) {
      this.send(drive); // single zero on release
      this.lastWasZero = true;
    }
  }
}
