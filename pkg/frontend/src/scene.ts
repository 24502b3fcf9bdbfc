/**
 * Wireframe scene builder. Everything here is pure geometry: the
 * render loop feeds it the latest snapshot plus static config (tool
 * rod, wall plane) and draws the returned segments. Each segment
 * carries a kind tag so snapshot-backed geometry and config-backed
 * geometry stay visually distinguishable.
 *
 * World frame is z-up. The camera orbits a target point; projection
 * is a plain perspective divide, enough for a wireframe.
 */

import { Quat, Snapshot, V3 } from "./protocol.js";

export type SegmentKind =
  | "vehicle-x"
  | "vehicle-y"
  | "vehicle-z"
  | "tool"
  | "ghost-x"
  | "ghost-y"
  | "ghost-z"
  | "wall"
  | "wall-normal"
  | "floor";

export interface Segment {
  a: V3;
  b: V3;
  kind: SegmentKind;
}

export function rotate(q: Quat, v: V3): V3 {
  const [w, x, y, z] = q;
  // t = 2 (q_vec x v), v' = v + w t + q_vec x t
  const tx = 2 * (y * v[2] - z * v[1]);
  const ty = 2 * (z * v[0] - x * v[2]);
  const tz = 2 * (x * v[1] - y * v[0]);
  return [
    v[0] + w * tx + (y * tz - z * ty),
    v[1] + w * ty + (z * tx - x * tz),
    v[2] + w * tz + (x * ty - y * tx),
  ];
}

function add(a: V3, b: V3): V3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

function scale(a: V3, s: number): V3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

function dot(a: V3, b: V3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function cross(a: V3, b: V3): V3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function norm(a: V3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

function normalize(a: V3): V3 {
  const n = norm(a);
  return n > 0 ? scale(a, 1 / n) : [0, 0, 0];
}

function triad(p: V3, q: Quat, len: number, kinds: [SegmentKind, SegmentKind, SegmentKind]): Segment[] {
  const ex = rotate(q, [len, 0, 0]);
  const ey = rotate(q, [0, len, 0]);
  const ez = rotate(q, [0, 0, len]);
  return [
    { a: p, b: add(p, ex), kind: kinds[0] },
    { a: p, b: add(p, ey), kind: kinds[1] },
    { a: p, b: add(p, ez), kind: kinds[2] },
  ];
}

export function vehicleSegments(p: V3, q: Quat, axisLen = 0.25): Segment[] {
  return triad(p, q, axisLen, ["vehicle-x", "vehicle-y", "vehicle-z"]);
}

export function ghostSegments(p: V3, q: Quat, axisLen = 0.25): Segment[] {
  return triad(p, q, axisLen, ["ghost-x", "ghost-y", "ghost-z"]);
}

/** Tool rod from the body origin to the tip, in world coordinates. */
export function toolSegment(p: V3, q: Quat, rod: V3): Segment {
  return { a: p, b: add(p, rotate(q, rod)), kind: "tool" };
}

export interface WallConfig {
  point: V3;
  normal: V3;
}

export function wallSegments(wall: WallConfig, halfSize = 1.0): Segment[] {
  const n = normalize(wall.normal);
  // any in-plane tangent pair will do for drawing the quad
  const seed: V3 = Math.abs(n[2]) < 0.9 ? [0, 0, 1] : [1, 0, 0];
  const u = normalize(cross(n, seed));
  const v = cross(n, u);
  const c = wall.point;
  const corners: V3[] = [
    add(c, add(scale(u, halfSize), scale(v, halfSize))),
    add(c, add(scale(u, -halfSize), scale(v, halfSize))),
    add(c, add(scale(u, -halfSize), scale(v, -halfSize))),
    add(c, add(scale(u, halfSize), scale(v, -halfSize))),
  ];
  const segs: Segment[] = [];
  for (let i = 0; i < 4; i++) {
    segs.push({ a: corners[i], b: corners[(i + 1) % 4], kind: "wall" });
  }
  segs.push({ a: c, b: add(c, scale(n, 0.3)), kind: "wall-normal" });
  return segs;
}

/**
 * Tool misalignment: angle between the rod axis and the into-wall
 * direction (the negated outward normal), in radians. Zero means the
 * tool points straight at the wall.
 */
export function misalignment(q: Quat, rod: V3, wallNormal: V3): number {
  const dir = normalize(rotate(q, rod));
  const into = normalize(scale(wallNormal, -1));
  const c = Math.min(1, Math.max(-1, dot(dir, into)));
  return Math.acos(c);
}

export class Camera {
  constructor(
    public yaw = 0.7,
    public pitch = 0.35,
    public dist = 3.5,
    public target: V3 = [0, 0, 0],
    public focal = 2.4,
  ) {}

  orbit(dYaw: number, dPitch: number): void {
    this.yaw += dYaw;
    const lim = Math.PI / 2 - 0.05;
    this.pitch = Math.min(lim, Math.max(-lim, this.pitch + dPitch));
  }

  zoom(factor: number): void {
    this.dist = Math.min(20, Math.max(0.5, this.dist * factor));
  }

  /**
   * World point to normalized screen coordinates: x right, y up, both
   * roughly [-1, 1] at the target distance; depth > 0 is in front.
   */
  project(p: V3): [number, number, number] {
    const cy = Math.cos(this.yaw), sy = Math.sin(this.yaw);
    const cp = Math.cos(this.pitch), sp = Math.sin(this.pitch);
    const dx = p[0] - this.target[0];
    const dy = p[1] - this.target[1];
    const dz = p[2] - this.target[2];
    // yaw about world z, then pitch toward the viewer
    const x1 = cy * dx + sy * dy;
    const y1 = -sy * dx + cy * dy;
    const z1 = dz;
    const depthAxis = cp * y1 + sp * z1;
    const up = -sp * y1 + cp * z1;
    const depth = this.dist + depthAxis;
    const k = depth > 0.1 ? this.focal / depth : 0;
    return [x1 * k, up * k, depth];
  }
}

export interface SceneConfig {
  rod: V3;
  wall: WallConfig | null;
  axisLen?: number;
}

export interface Scene {
  segments: Segment[];
  /** radians, null with no wall configured */
  alpha: number | null;
}

export function buildScene(snap: Snapshot, cfg: SceneConfig): Scene {
  const axisLen = cfg.axisLen ?? 0.25;
  const segments: Segment[] = [];
  segments.push(...ghostSegments(snap.reference.p, snap.reference.q, axisLen));
  segments.push(...vehicleSegments(snap.vehicle.p, snap.vehicle.q, axisLen));
  segments.push(toolSegment(snap.vehicle.p, snap.vehicle.q, cfg.rod));
  let alpha: number | null = null;
  if (cfg.wall) {
    segments.push(...wallSegments(cfg.wall));
    alpha = misalignment(snap.vehicle.q, cfg.rod, cfg.wall.normal);
  }
  return { segments, alpha };
}
