import { describe, expect, it } from "vitest";

import {
  arcRotation,
  Coalescer,
  DOF_RX,
  DOF_RY,
  DOF_RZ,
  DOF_X,
  InputState,
  validateGamepadBindings,
  validateKeyPairs,
} from "../src/input.js";
import { Six } from "../src/protocol.js";

describe("binding validation", () => {
  it("rejects a DoF bound twice on one device", () => {
    expect(() =>
      validateKeyPairs([
        { plus: "KeyW", minus: "KeyS", dof: 0, sensitivity: 0.1 },
        { plus: "KeyA", minus: "KeyD", dof: 0, sensitivity: 0.1 },
      ]),
    ).toThrow(/bound twice/);
    expect(() =>
      validateGamepadBindings([
        { axis: 0, dof: 2, sensitivity: 1 },
        { axis: 1, dof: 2, sensitivity: 1 },
      ]),
    ).toThrow(/bound twice/);
  });

  it("rejects nonpositive sensitivity and reused keys", () => {
    expect(() =>
      validateKeyPairs([{ plus: "KeyW", minus: "KeyS", dof: 0, sensitivity: 0 }]),
    ).toThrow(/sensitivity/);
    expect(() =>
      validateKeyPairs([
        { plus: "KeyW", minus: "KeyS", dof: 0, sensitivity: 0.1 },
        { plus: "KeyW", minus: "KeyX", dof: 1, sensitivity: 0.1 },
      ]),
    ).toThrow(/bound twice/);
  });
});

describe("latest-wins per DoF", () => {
  it("opposing keys overwrite, never average", () => {
    const s = new InputState();
    s.keyEvent("KeyW", true);
    expect(s.frame()[DOF_X]).toBeCloseTo(0.15);
    s.keyEvent("KeyS", true);
    expect(s.frame()[DOF_X]).toBeCloseTo(-0.15);
  });

  it("a released key zeroes its DoF in the very next frame", () => {
    const s = new InputState();
    s.keyEvent("KeyW", true);
    s.keyEvent("KeyW", false);
    expect(s.frame()[DOF_X]).toBe(0);
  });

  it("releasing the key that lost ownership does nothing", () => {
    const s = new InputState();
    s.keyEvent("KeyW", true);
    s.keyEvent("KeyS", true);
    s.keyEvent("KeyW", false); // S owns the axis now
    expect(s.frame()[DOF_X]).toBeCloseTo(-0.15);
    s.keyEvent("KeyS", false);
    expect(s.frame()[DOF_X]).toBe(0);
  });
});

describe("axis locks", () => {
  it("locked rotation DoFs read zero while the gesture keeps writing", () => {
    const s = new InputState();
    s.toggleLock(DOF_RX);
    s.toggleLock(DOF_RY);
    s.toggleLock(DOF_RZ);
    s.rotationDrag(0.5, -0.3, 1.0);
    const f = s.frame();
    expect(f.slice(3)).toEqual([0, 0, 0]);
    // translation is untouched by rotation locks
    s.keyEvent("KeyW", true);
    expect(s.frame()[DOF_X]).toBeCloseTo(0.15);
    // unlocking exposes the still-active gesture value
    s.toggleLock(DOF_RY);
    expect(s.frame()[DOF_RY]).toBeCloseTo(0.5);
  });
});

describe("arc gesture", () => {
  it("maps the drag vector to the perpendicular rotation axis", () => {
    expect(arcRotation(1, 0, 0.4)).toEqual([-0, 0.4, 0]);
    expect(arcRotation(0, 1, 0.4)).toEqual([-0.4, 0, 0]);
  });

  it("slider mode ignores pad drags and takes direct axis writes", () => {
    const s = new InputState();
    s.rotationMode = "sliders";
    s.rotationDrag(1, 1, 1);
    expect(s.frame().slice(3)).toEqual([0, 0, 0]);
    s.setAxis(DOF_RZ, 0.2);
    expect(s.frame()[DOF_RZ]).toBeCloseTo(0.2);
  });
});

describe("gamepad", () => {
  it("applies deadzone then sensitivity", () => {
    const s = new InputState();
    const bindings = [{ axis: 0, dof: DOF_X, sensitivity: 0.15 }];
    s.gamepad([0.05], bindings);
    expect(s.frame()[DOF_X]).toBe(0);
    s.gamepad([0.5], bindings);
    expect(s.frame()[DOF_X]).toBeCloseTo(0.075);
  });
});

describe("coalescer", () => {
  it("caps the stream at 120 Hz with ever-changing input", () => {
    const c = new Coalescer();
    let sent = 0;
    for (let t = 0; t < 1000; t++) {
      const v = [t * 1e-4, 0, 0, 0, 0, 0] as Six;
      if (c.push(v, t) !== null) sent++;
    }
    expect(sent).toBeLessThanOrEqual(120);
    expect(sent).toBeGreaterThan(100);
  });

  it("suppresses unchanged frames until the keepalive is due", () => {
    const c = new Coalescer();
    const v = [0.1, 0, 0, 0, 0, 0] as Six;
    expect(c.push(v, 0)).not.toBeNull();
    expect(c.push(v, 20)).toBeNull();
    expect(c.push(v, 200)).toBeNull();
    expect(c.push(v, 251)).not.toBeNull();
  });

  it("passes a change immediately after the rate window", () => {
    const c = new Coalescer();
    const a = [0.1, 0, 0, 0, 0, 0] as Six;
    const b = [0, 0, 0, 0, 0, 0] as Six;
    expect(c.push(a, 0)).not.toBeNull();
    const out = c.push(b, 9);
    expect(out).toEqual(b);
  });

  it("returns a copy, not the caller's array", () => {
    const c = new Coalescer();
    const v = [0.1, 0, 0, 0, 0, 0] as Six;
    const out = c.push(v, 0) as Six;
    v[0] = 99;
    expect(out[0]).toBeCloseTo(0.1);
  });
});
