import { describe, expect, it } from "vitest";

import { helloFrame, inputFrame, parseServerFrame, Six } from "../src/protocol.js";
import { makeSnapshot, snapJson } from "./helpers.js";

describe("outbound frames", () => {
  it("hello carries the role", () => {
    expect(JSON.parse(helloFrame("driver"))).toEqual({ type: "hello", role: "driver" });
    expect(JSON.parse(helloFrame("observer"))).toEqual({ type: "hello", role: "observer" });
  });

  it("input carries mode, client time, and six values", () => {
    const v = [0.1, 0, 0.02, 0, 0, -0.3] as Six;
    const obj = JSON.parse(inputFrame("pose", v, 123.5));
    expect(obj).toEqual({ type: "input", mode: "pose", t: 123.5, v });
  });
});

describe("inbound parsing", () => {
  it("accepts a well-formed snapshot", () => {
    const snap = makeSnapshot({ tick: 42, t: 0.042, contact: true, contact_force: 3.5 });
    const parsed = parseServerFrame(JSON.stringify(snap));
    expect(parsed).toEqual(snap);
  });

  it("accepts an error frame", () => {
    expect(parseServerFrame('{"type":"error","msg":"nope"}')).toEqual({
      type: "error",
      msg: "nope",
    });
  });

  it("rejects non-JSON without throwing", () => {
    expect(parseServerFrame("not json at all")).toBeNull();
    expect(parseServerFrame("")).toBeNull();
  });

  it("rejects wrong shapes", () => {
    expect(parseServerFrame("[1,2,3]")).toBeNull();
    expect(parseServerFrame('{"type":"snapshot"}')).toBeNull();
    expect(parseServerFrame('{"type":"unknown"}')).toBeNull();
    expect(parseServerFrame('{"type":"error","msg":7}')).toBeNull();

    const short = makeSnapshot() as unknown as Record<string, unknown>;
    short.w_fb = [0, 0, 0];
    expect(parseServerFrame(JSON.stringify(short))).toBeNull();

    const badTick = makeSnapshot() as unknown as Record<string, unknown>;
    badTick.tick = "7";
    expect(parseServerFrame(JSON.stringify(badTick))).toBeNull();
  });

  it("rejects non-finite numbers", () => {
    // 1e999 overflows to Infinity in JSON.parse
    const raw = snapJson().replace('"contact_force":0', '"contact_force":1e999');
    expect(parseServerFrame(raw)).toBeNull();
  });
});
