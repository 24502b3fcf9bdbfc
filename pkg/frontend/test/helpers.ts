import { Six, Snapshot } from "../src/protocol.js";
import { SocketLike } from "../src/session.js";

export function makeSnapshot(over: Partial<Snapshot> = {}): Snapshot {
  return {
    type: "snapshot",
    tick: 0,
    t: 0,
    handle: { p: [0, 0, 0], q: [1, 0, 0, 0] },
    reference: { p: [0, 0, 0], q: [1, 0, 0, 0] },
    vehicle: { p: [0, 0, 0], q: [1, 0, 0, 0], v: [0, 0, 0], w: [0, 0, 0] },
    w_rec: [0, 0, 0, 0, 0, 0] as Six,
    w_int: [0, 0, 0, 0, 0, 0] as Six,
    w_fb: [0, 0, 0, 0, 0, 0] as Six,
    contact: false,
    contact_force: 0,
    ...over,
  };
}

export function snapJson(over: Partial<Snapshot> = {}): string {
  return JSON.stringify(makeSnapshot(over));
}

/** Scripted WebSocket stand-in; tests drive open/message/close. */
export class MockSocket implements SocketLike {
  readyState = 0;
  sent: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;

  constructor(readonly url: string) {}

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    if (this.readyState === 3) return;
    this.readyState = 3;
    this.onclose?.();
  }

  open(): void {
    this.readyState = 1;
    this.onopen?.();
  }

  message(data: string): void {
    this.onmessage?.({ data });
  }

  serverClose(): void {
    this.readyState = 3;
    this.onclose?.();
  }
}

export class SocketFactory {
  sockets: MockSocket[] = [];

  make = (url: string): MockSocket => {
    const s = new MockSocket(url);
    this.sockets.push(s);
    return s;
  };

  get last(): MockSocket {
    return this.sockets[this.sockets.length - 1];
  }
}
