/**
 * Connection lifecycle against the teleop service. One session owns
 * one websocket at a time: hello as the requested role, fall back to
 * observer if the driver seat is taken, keep only the newest snapshot,
 * and reconnect with exponential backoff after a drop.
 *
 * Inputs pass through a coalescer (120 Hz cap, latest wins) and are
 * silently dropped while the socket is anything but open, so a dead
 * service never accumulates a send queue.
 */

import { Coalescer } from "./input.js";
import {
  ErrorFrame,
  helloFrame,
  inputFrame,
  Mode,
  parseServerFrame,
  Role,
  Six,
  Snapshot,
} from "./protocol.js";

/** The subset of the browser WebSocket the session touches. Tests
 * supply a scripted stand-in through SessionOptions.wsFactory. */
export interface SocketLike {
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
}

const OPEN = 1;

export type SessionStatus = "connecting" | "live" | "stale" | "retrying" | "closed";

export interface SessionOptions {
  url: string;
  role?: Role;
  /** retake driver as observer when the seat is occupied (default on) */
  fallbackToObserver?: boolean;
  reconnect?: boolean;
  staleMs?: number;
  wsFactory?: (url: string) => SocketLike;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (h: unknown) => void;
}

const BACKOFF_BASE_MS = 500;
const BACKOFF_MAX_MS = 8000;

export class CockpitSession {
  latest: Snapshot | null = null;
  lastSnapshotAt = -Infinity;
  lastError: ErrorFrame | null = null;
  /** role actually granted on the current connection */
  role: Role;
  snapshotCount = 0;
  attempts = 0;

  private readonly requestedRole: Role;
  private ws: SocketLike | null = null;
  private stopped = false;
  private retryHandle: unknown = null;
  private coalescer = new Coalescer();
  private readonly opts: Required<Pick<SessionOptions, "fallbackToObserver" | "reconnect" | "staleMs">> &
    SessionOptions;

  constructor(options: SessionOptions) {
    this.opts = {
      fallbackToObserver: true,
      reconnect: true,
      staleMs: 500,
      ...options,
    };
    this.requestedRole = options.role ?? "driver";
    this.role = this.requestedRole;
    this.open(this.requestedRole);
  }

  private factory(url: string): SocketLike {
    if (this.opts.wsFactory) return this.opts.wsFactory(url);
    return new WebSocket(url) as unknown as SocketLike;
  }

  private timer(fn: () => void, ms: number): unknown {
    return (this.opts.setTimer ?? setTimeout)(fn, ms);
  }

  private open(role: Role): void {
    this.role = role;
    const ws = this.factory(this.opts.url);
    this.ws = ws;
    let sawSnapshot = false;
    ws.onopen = () => {
      ws.send(helloFrame(role));
    };
    ws.onmessage = (ev) => {
      const frame = parseServerFrame(ev.data);
      if (frame === null) return; // malformed server frame, ignore
      if (frame.type === "snapshot") {
        sawSnapshot = true;
        this.attempts = 0;
        this.latest = frame;
        this.snapshotCount += 1;
        this.lastSnapshotAt = Date.now();
        return;
      }
      this.lastError = frame;
    };
    ws.onclose = () => {
      if (this.ws !== ws) return;
      this.ws = null;
      if (this.stopped) return;
      // seat taken: the hello was refused before any snapshot arrived
      const seatTaken =
        role === "driver" &&
        !sawSnapshot &&
        this.lastError !== null &&
        this.lastError.msg.includes("driver");
      if (seatTaken && this.opts.fallbackToObserver) {
        this.open("observer");
        return;
      }
      if (this.opts.reconnect) this.scheduleRetry();
    };
  }

  private scheduleRetry(): void {
    const delay = Math.min(BACKOFF_MAX_MS, BACKOFF_BASE_MS * 2 ** this.attempts);
    this.attempts += 1;
    this.retryHandle = this.timer(() => {
      this.retryHandle = null;
      if (!this.stopped) this.open(this.requestedRole);
    }, delay);
  }

  status(nowMs: number): SessionStatus {
    if (this.stopped) return "closed";
    if (this.ws === null) return this.opts.reconnect ? "retrying" : "closed";
    if (this.ws.readyState !== OPEN || this.latest === null) return "connecting";
    return nowMs - this.lastSnapshotAt > this.opts.staleMs ? "stale" : "live";
  }

  canDrive(): boolean {
    return this.role === "driver" && this.ws !== null && this.ws.readyState === OPEN;
  }

  /** Offer an input frame; returns true if it went out on the wire. */
  sendInput(mode: Mode, v: Six, nowMs: number): boolean {
    if (!this.canDrive()) return false;
    const frame = this.coalescer.push(v, nowMs);
    if (frame === null) return false;
    (this.ws as SocketLike).send(inputFrame(mode, frame, nowMs));
    return true;
  }

  close(): void {
    this.stopped = true;
    if (this.retryHandle !== null && this.opts.clearTimer) {
      this.opts.clearTimer(this.retryHandle);
      this.retryHandle = null;
    }
    if (this.ws) {
      const ws = this.ws;
      this.ws = null;
      ws.close();
    }
  }
}
