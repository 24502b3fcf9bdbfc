/**
 * Wire protocol with the teleop service: one JSON object per text
 * frame. Client sends hello then input frames; the server streams
 * snapshot frames and reports violations as error frames.
 *
 * Parsing is strict on purpose. The cockpit renders only values that
 * arrived in a well-formed snapshot, so anything that fails a shape
 * check is dropped here and never reaches the view.
 */

export type Role = "driver" | "observer";
export type Mode = "pose" | "wrench";

export type V3 = [number, number, number];
/** scalar-first unit quaternion [w, x, y, z] */
export type Quat = [number, number, number, number];
export type Six = [number, number, number, number, number, number];

export interface PoseFrame {
  p: V3;
  q: Quat;
}

export interface VehicleFrame extends PoseFrame {
  v: V3;
  w: V3;
}

export interface Snapshot {
  type: "snapshot";
  tick: number;
  t: number;
  handle: PoseFrame;
  reference: PoseFrame;
  vehicle: VehicleFrame;
  w_rec: Six;
  w_int: Six;
  w_fb: Six;
  contact: boolean;
  contact_force: number;
}

export interface ErrorFrame {
  type: "error";
  msg: string;
}

export type ServerFrame = Snapshot | ErrorFrame;

export function helloFrame(role: Role): string {
  return JSON.stringify({ type: "hello", role });
}

export function inputFrame(mode: Mode, v: Six, tMs: number): string {
  return JSON.stringify({ type: "input", mode, t: tMs, v });
}

function finiteTuple(x: unknown, n: number): number[] | null {
  if (!Array.isArray(x) || x.length !== n) return null;
  for (const e of x) {
    if (typeof e !== "number" || !Number.isFinite(e)) return null;
  }
  return x as number[];
}

function poseFrame(x: unknown): PoseFrame | null {
  if (typeof x !== "object" || x === null) return null;
  const o = x as Record<string, unknown>;
  const p = finiteTuple(o.p, 3);
  const q = finiteTuple(o.q, 4);
  if (!p || !q) return null;
  return { p: p as V3, q: q as Quat };
}

function vehicleFrame(x: unknown): VehicleFrame | null {
  const pose = poseFrame(x);
  if (!pose) return null;
  const o = x as Record<string, unknown>;
  const v = finiteTuple(o.v, 3);
  const w = finiteTuple(o.w, 3);
  if (!v || !w) return null;
  return { ...pose, v: v as V3, w: w as V3 };
}

/** Parse one inbound frame; null for anything malformed. Never throws. */
export function parseServerFrame(raw: string): ServerFrame | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const o = obj as Record<string, unknown>;

  if (o.type === "error") {
    return typeof o.msg === "string" ? { type: "error", msg: o.msg } : null;
  }
  if (o.type !== "snapshot") return null;

  const handle = poseFrame(o.handle);
  const reference = poseFrame(o.reference);
  const vehicle = vehicleFrame(o.vehicle);
  const w_rec = finiteTuple(o.w_rec, 6);
  const w_int = finiteTuple(o.w_int, 6);
  const w_fb = finiteTuple(o.w_fb, 6);
  if (!handle || !reference || !vehicle || !w_rec || !w_int || !w_fb) return null;
  if (typeof o.tick !== "number" || typeof o.t !== "number") return null;
  if (typeof o.contact !== "boolean") return null;
  if (typeof o.contact_force !== "number" || !Number.isFinite(o.contact_force)) return null;

  return {
    type: "snapshot",
    tick: o.tick,
    t: o.t,
    handle,
    reference,
    vehicle,
    w_rec: w_rec as Six,
    w_int: w_int as Six,
    w_fb: w_fb as Six,
    contact: o.contact,
    contact_force: o.contact_force,
  };
}

export const ZERO_SIX: Six = [0, 0, 0, 0, 0, 0];
