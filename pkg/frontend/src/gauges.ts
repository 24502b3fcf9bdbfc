// Feedback wrench instrumentation. The recentering and interaction
// contributions are displayed side by side; ranges clamp to the
// configured maxima so a spike saturates the bar instead of breaking
// the layout.

import { Six, Snapshot } from "./protocol.js";

export interface GaugeConfig {
  forceMax: number;
  torqueMax: number;
}

export const DEFAULT_GAUGES: GaugeConfig = { forceMax: 20, torqueMax: 5 };

export interface GaugeState {
  recenter: Six;
  interaction: Six;
  total: Six;
  contact: boolean;
  contactForce: number;
}

function clampSix(v: Six, cfg: GaugeConfig): Six {
  const out = [...v] as Six;
  for (let i = 0; i < 6; i++) {
    const m = i < 3 ? cfg.forceMax : cfg.torqueMax;
    if (out[i] > m) out[i] = m;
    else if (out[i] < -m) out[i] = -m;
  }
  return out;
}

export function gaugeState(snap: Snapshot, cfg: GaugeConfig = DEFAULT_GAUGES): GaugeState {
  return {
    recenter: clampSix(snap.w_rec, cfg),
    interaction: clampSix(snap.w_int, cfg),
    total: clampSix(snap.w_fb, cfg),
    contact: snap.contact,
    contactForce: snap.contact_force,
  };
}

/** Signed bar fill in [-1, 1] for component i of a clamped wrench. */
export function barFraction(value: number, i: number, cfg: GaugeConfig = DEFAULT_GAUGES): number {
  const m = i < 3 ? cfg.forceMax : cfg.torqueMax;
  const f = value / m;
  return f > 1 ? 1 : f < -1 ? -1 : f;
}
