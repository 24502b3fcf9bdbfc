/**
 * Six-axis input surface: keyboard pairs, pointer pads, optional
 * gamepad axes, all funnelled into one latest-value-per-DoF store.
 *
 * Coalescing never averages. Whatever a device wrote last is what the
 * next input frame carries, so releasing a key zeroes its DoF within
 * one frame. Axis locks clamp chosen DoFs to zero at read time; the
 * underlying gesture keeps writing, the frame just ignores it.
 */

import { Six } from "./protocol.js";

export const DOF_X = 0;
export const DOF_Y = 1;
export const DOF_Z = 2;
export const DOF_RX = 3;
export const DOF_RY = 4;
export const DOF_RZ = 5;

export type RotationMode = "arc" | "sliders";

export interface KeyPair {
  /** KeyboardEvent.code for the positive and negative direction */
  plus: string;
  minus: string;
  dof: number;
  sensitivity: number;
}

export interface GamepadAxisBinding {
  axis: number;
  dof: number;
  sensitivity: number;
}

// handle excursions stay well inside the station's 0.3 m workspace
export const DEFAULT_KEYS: KeyPair[] = [
  { plus: "KeyW", minus: "KeyS", dof: DOF_X, sensitivity: 0.15 },
  { plus: "KeyA", minus: "KeyD", dof: DOF_Y, sensitivity: 0.15 },
  { plus: "KeyR", minus: "KeyF", dof: DOF_Z, sensitivity: 0.15 },
  { plus: "KeyQ", minus: "KeyE", dof: DOF_RX, sensitivity: 0.35 },
  { plus: "ArrowUp", minus: "ArrowDown", dof: DOF_RY, sensitivity: 0.35 },
  { plus: "ArrowLeft", minus: "ArrowRight", dof: DOF_RZ, sensitivity: 0.35 },
];

export function validateKeyPairs(pairs: KeyPair[]): void {
  const seenDof = new Set<number>();
  const seenKey = new Set<string>();
  for (const b of pairs) {
    if (!(b.sensitivity > 0)) throw new Error(`sensitivity must be > 0 for dof ${b.dof}`);
    if (b.dof < 0 || b.dof > 5) throw new Error(`dof out of range: ${b.dof}`);
    if (seenDof.has(b.dof)) throw new Error(`dof ${b.dof} bound twice on keyboard`);
    seenDof.add(b.dof);
    for (const k of [b.plus, b.minus]) {
      if (seenKey.has(k)) throw new Error(`key ${k} bound twice`);
      seenKey.add(k);
    }
  }
}

export function validateGamepadBindings(bindings: GamepadAxisBinding[]): void {
  const seen = new Set<number>();
  for (const b of bindings) {
    if (!(b.sensitivity > 0)) throw new Error(`sensitivity must be > 0 for dof ${b.dof}`);
    if (b.dof < 0 || b.dof > 5) throw new Error(`dof out of range: ${b.dof}`);
    if (seen.has(b.dof)) throw new Error(`dof ${b.dof} bound twice on gamepad`);
    seen.add(b.dof);
  }
}

/** Arc drag on the rotation pad: the drag vector picks the rotation
 * axis perpendicular to it in the view plane, wheel adds yaw. */
export function arcRotation(dx: number, dy: number, sensitivity: number): [number, number, number] {
  return [-dy * sensitivity, dx * sensitivity, 0];
}

export class InputState {
  private values = new Float64Array(6);
  readonly locks = new Set<number>();
  readonly keys: KeyPair[];
  rotationMode: RotationMode = "arc";

  constructor(keys: KeyPair[] = DEFAULT_KEYS) {
    validateKeyPairs(keys);
    this.keys = keys;
  }

  setAxis(dof: number, value: number): void {
    this.values[dof] = value;
  }

  keyEvent(code: string, down: boolean): boolean {
    for (const b of this.keys) {
      if (code !== b.plus && code !== b.minus) continue;
      const sign = code === b.plus ? 1 : -1;
      if (down) {
        this.values[b.dof] = sign * b.sensitivity;
      } else if (Math.sign(this.values[b.dof]) === sign) {
        // only the key that owns the current direction releases it
        this.values[b.dof] = 0;
      }
      return true;
    }
    return false;
  }

  /** Pointer drag on the translation pad writes x and y directly. */
  translationDrag(nx: number, ny: number, sensitivity: number): void {
    this.values[DOF_X] = ny * sensitivity;
    this.values[DOF_Y] = -nx * sensitivity;
  }

  rotationDrag(dx: number, dy: number, sensitivity: number): void {
    if (this.rotationMode !== "arc") return;
    const [rx, ry, rz] = arcRotation(dx, dy, sensitivity);
    this.values[DOF_RX] = rx;
    this.values[DOF_RY] = ry;
    this.values[DOF_RZ] += rz;
  }

  gamepad(axes: readonly number[], bindings: GamepadAxisBinding[], deadzone = 0.08): void {
    for (const b of bindings) {
      const a = axes[b.axis];
      if (a === undefined) continue;
      this.values[b.dof] = Math.abs(a) < deadzone ? 0 : a * b.sensitivity;
    }
  }

  toggleLock(dof: number): boolean {
    if (this.locks.has(dof)) {
      this.locks.delete(dof);
      return false;
    }
    this.locks.add(dof);
    return true;
  }

  /** Current frame value: latest write per DoF, locked DoFs read zero. */
  frame(): Six {
    const out = Array.from(this.values) as Six;
    for (const dof of this.locks) out[dof] = 0;
    return out;
  }

  reset(): void {
    this.values.fill(0);
  }
}

/**
 * Rate limiter between the input surface and the socket. Frames pass
 * at most every minIntervalMs (default caps the stream at 120 Hz);
 * unchanged frames are suppressed until the keepalive is due.
 */
export class Coalescer {
  private lastSent: Six | null = null;
  private lastAt = -Infinity;

  constructor(
    readonly minIntervalMs: number = 1000 / 120,
    readonly keepaliveMs: number = 250,
  ) {}

  push(v: Six, nowMs: number): Six | null {
    if (nowMs - this.lastAt < this.minIntervalMs) return null;
    const changed =
      this.lastSent === null || v.some((x, i) => x !== (this.lastSent as Six)[i]);
    if (!changed && nowMs - this.lastAt < this.keepaliveMs) return null;
    this.lastSent = [...v] as Six;
    this.lastAt = nowMs;
    return this.lastSent;
  }
}
