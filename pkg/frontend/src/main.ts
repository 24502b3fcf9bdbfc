// Browser bootstrap: wires the session, input surface, wireframe
// canvas, and gauges together. Everything rendered comes from the
// latest snapshot; the only local-echo elements are the pad
// crosshairs, which show what this client is currently commanding.

import { DEFAULT_GAUGES, barFraction, gaugeState } from "./gauges.js";
import { DOF_RX, DOF_RY, DOF_RZ, InputState } from "./input.js";
import { Mode, Role, Six, V3 } from "./protocol.js";
import { buildScene, Camera, Segment, SegmentKind, WallConfig } from "./scene.js";
import { CockpitSession } from "./session.js";

const qs = new URLSearchParams(location.search);

function parseTriple(s: string | null): V3 | null {
  if (!s) return null;
  const parts = s.split(",").map(Number);
  if (parts.length !== 3 || parts.some((x) => !Number.isFinite(x))) return null;
  return parts as V3;
}

const server = qs.get("server") ?? location.host;
const role = (qs.get("role") === "observer" ? "observer" : "driver") as Role;
const rod: V3 = parseTriple(qs.get("rod")) ?? [0.6, 0, 0];
let wall: WallConfig | null = null;
const wallParam = qs.get("wall");
if (wallParam) {
  const parts = wallParam.split(",").map(Number);
  if (parts.length === 6 && parts.every(Number.isFinite)) {
    wall = { point: [parts[0], parts[1], parts[2]], normal: [parts[3], parts[4], parts[5]] };
  }
}

const proto = location.protocol === "https:" ? "wss" : "ws";
const session = new CockpitSession({ url: `${proto}://${server}/ws`, role });
const input = new InputState();
input.rotationMode = qs.get("rot") === "sliders" ? "sliders" : "arc";
let mode: Mode = "pose";

// ---- DOM ------------------------------------------------------------

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d") as CanvasRenderingContext2D;
const banner = document.getElementById("banner") as HTMLElement;
const alphaOut = document.getElementById("alpha") as HTMLElement;
const contactDot = document.getElementById("contact") as HTMLElement;
const gaugeRoot = document.getElementById("gauges") as HTMLElement;
const lockRoot = document.getElementById("locks") as HTMLElement;
const padT = document.getElementById("pad-t") as HTMLCanvasElement;
const padR = document.getElementById("pad-r") as HTMLCanvasElement;
const modeSel = document.getElementById("mode") as HTMLSelectElement;
const sliderRoot = document.getElementById("sliders") as HTMLElement;

const DOF_NAMES = ["x", "y", "z", "rx", "ry", "rz"];
const bars: HTMLElement[][] = [];
for (const group of ["recenter", "interaction", "total"]) {
  const col = document.createElement("div");
  col.className = "gauge-col";
  col.innerHTML = `<h3>${group}</h3>`;
  const row: HTMLElement[] = [];
  DOF_NAMES.forEach((name) => {
    const wrap = document.createElement("div");
    wrap.className = "bar-wrap";
    wrap.innerHTML = `<span class="bar-label">${name}</span><div class="bar"><div class="fill"></div></div>`;
    col.appendChild(wrap);
    row.push(wrap.querySelector(".fill") as HTMLElement);
  });
  gaugeRoot.appendChild(col);
  bars.push(row);
}

DOF_NAMES.forEach((name, dof) => {
  const label = document.createElement("label");
  const box = document.createElement("input");
  box.type = "checkbox";
  box.onchange = () => input.toggleLock(dof);
  label.appendChild(box);
  label.appendChild(document.createTextNode(` lock ${name}`));
  lockRoot.appendChild(label);
});

if (input.rotationMode === "sliders") {
  sliderRoot.style.display = "block";
  [DOF_RX, DOF_RY, DOF_RZ].forEach((dof, i) => {
    const label = document.createElement("label");
    label.textContent = DOF_NAMES[dof];
    const s = document.createElement("input");
    s.type = "range";
    s.min = "-0.5";
    s.max = "0.5";
    s.step = "0.01";
    s.value = "0";
    s.oninput = () => input.setAxis(dof, Number(s.value));
    s.ondblclick = () => {
      s.value = "0";
      input.setAxis(dof, 0);
    };
    label.appendChild(s);
    sliderRoot.appendChild(label);
    void i;
  });
}

modeSel.onchange = () => {
  mode = modeSel.value === "wrench" ? "wrench" : "pose";
  input.reset();
};

// ---- input devices ---------------------------------------------------

window.addEventListener("keydown", (e) => {
  if (e.repeat) return;
  if (input.keyEvent(e.code, true)) e.preventDefault();
});
window.addEventListener("keyup", (e) => {
  if (input.keyEvent(e.code, false)) e.preventDefault();
});

function padHandler(pad: HTMLCanvasElement, onMove: (nx: number, ny: number) => void, onEnd: () => void) {
  let active = false;
  pad.addEventListener("pointerdown", (e) => {
    active = true;
    pad.setPointerCapture(e.pointerId);
  });
  pad.addEventListener("pointermove", (e) => {
    if (!active) return;
    const r = pad.getBoundingClientRect();
    const nx = ((e.clientX - r.left) / r.width) * 2 - 1;
    const ny = ((e.clientY - r.top) / r.height) * 2 - 1;
    onMove(Math.max(-1, Math.min(1, nx)), Math.max(-1, Math.min(1, ny)));
  });
  const end = () => {
    active = false;
    onEnd();
  };
  pad.addEventListener("pointerup", end);
  pad.addEventListener("pointercancel", end);
}

padHandler(
  padT,
  (nx, ny) => input.translationDrag(nx, -ny, mode === "pose" ? 0.15 : 30),
  () => {
    input.setAxis(0, 0);
    input.setAxis(1, 0);
  },
);
padHandler(
  padR,
  (nx, ny) => input.rotationDrag(nx, ny, mode === "pose" ? 0.4 : 3),
  () => {
    if (input.rotationMode !== "arc") return;
    input.setAxis(DOF_RX, 0);
    input.setAxis(DOF_RY, 0);
  },
);
padT.addEventListener("wheel", (e) => {
  e.preventDefault();
  input.setAxis(2, Math.max(-0.15, Math.min(0.15, input.frame()[2] - e.deltaY * 1e-4)));
});

// camera orbit on the main canvas
const camera = new Camera();
let orbiting = false;
canvas.addEventListener("pointerdown", (e) => {
  orbiting = true;
  canvas.setPointerCapture(e.pointerId);
});
canvas.addEventListener("pointermove", (e) => {
  if (orbiting) camera.orbit(e.movementX * 0.01, e.movementY * 0.01);
});
canvas.addEventListener("pointerup", () => (orbiting = false));
canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  camera.zoom(e.deltaY > 0 ? 1.1 : 0.9);
});

// ---- send loop -------------------------------------------------------

setInterval(() => {
  const frame = input.frame();
  if (typeof navigator !== "undefined" && navigator.getGamepads) {
    const gp = navigator.getGamepads()[0];
    if (gp) {
      input.gamepad(gp.axes, [
        { axis: 1, dof: 0, sensitivity: -0.15 as number },
        { axis: 0, dof: 1, sensitivity: -0.15 },
        { axis: 3, dof: 5, sensitivity: -0.35 },
      ].map((b) => ({ ...b, sensitivity: Math.abs(b.sensitivity) })));
    }
  }
  session.sendInput(mode, frame as Six, performance.now());
}, 8);

// ---- render loop -----------------------------------------------------

const STYLE: Record<SegmentKind, { color: string; width: number; dash: number[] }> = {
  "vehicle-x": { color: "#e05555", width: 2.5, dash: [] },
  "vehicle-y": { color: "#4fb54f", width: 2.5, dash: [] },
  "vehicle-z": { color: "#5577e0", width: 2.5, dash: [] },
  tool: { color: "#e0a030", width: 3.5, dash: [] },
  "ghost-x": { color: "#e05555", width: 1, dash: [4, 4] },
  "ghost-y": { color: "#4fb54f", width: 1, dash: [4, 4] },
  "ghost-z": { color: "#5577e0", width: 1, dash: [4, 4] },
  wall: { color: "#888", width: 1.5, dash: [] },
  "wall-normal": { color: "#cc66cc", width: 2, dash: [] },
  floor: { color: "#333", width: 1, dash: [] },
};

const floor: Segment[] = [];
for (let i = -2; i <= 2; i++) {
  floor.push({ a: [i, -2, 0], b: [i, 2, 0], kind: "floor" });
  floor.push({ a: [-2, i, 0], b: [2, i, 0], kind: "floor" });
}

function drawSegments(segs: Segment[]) {
  const w = canvas.width;
  const h = canvas.height;
  const s = Math.min(w, h) / 2;
  for (const seg of segs) {
    const [ax, ay, ad] = camera.project(seg.a);
    const [bx, by, bd] = camera.project(seg.b);
    if (ad <= 0.1 || bd <= 0.1) continue;
    const st = STYLE[seg.kind];
    ctx.strokeStyle = st.color;
    ctx.lineWidth = st.width;
    ctx.setLineDash(st.dash);
    ctx.beginPath();
    ctx.moveTo(w / 2 + ax * s, h / 2 - ay * s);
    ctx.lineTo(w / 2 + bx * s, h / 2 - by * s);
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function drawPad(pad: HTMLCanvasElement, x: number, y: number, serverX: number | null, serverY: number | null) {
  const c = pad.getContext("2d") as CanvasRenderingContext2D;
  const w = pad.width, h = pad.height;
  c.clearRect(0, 0, w, h);
  c.strokeStyle = "#555";
  c.strokeRect(0.5, 0.5, w - 1, h - 1);
  c.beginPath();
  c.moveTo(w / 2, 0);
  c.lineTo(w / 2, h);
  c.moveTo(0, h / 2);
  c.lineTo(w, h / 2);
  c.stroke();
  if (serverX !== null && serverY !== null) {
    c.fillStyle = "#4fb54f";
    c.beginPath();
    c.arc(w / 2 + serverX * w * 1.5, h / 2 - serverY * h * 1.5, 5, 0, 2 * Math.PI);
    c.fill();
  }
  c.strokeStyle = "#e0a030";
  c.beginPath();
  c.arc(w / 2 + x * w / 2, h / 2 - y * h / 2, 7, 0, 2 * Math.PI);
  c.stroke();
}

function render() {
  const now = Date.now();
  const status = session.status(now);
  banner.textContent = `${status} | role: ${session.role}${session.lastError ? " | " + session.lastError.msg : ""}`;
  banner.className = status === "live" ? "ok" : status === "stale" ? "warn" : "bad";

  ctx.fillStyle = "#14161a";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const snap = session.latest;
  if (snap) {
    const scene = buildScene(snap, { rod, wall });
    drawSegments([...floor, ...scene.segments]);
    alphaOut.textContent =
      scene.alpha === null ? "" : `alpha ${(scene.alpha * 180 / Math.PI).toFixed(1)} deg`;
    const g = gaugeState(snap);
    [g.recenter, g.interaction, g.total].forEach((six, col) => {
      six.forEach((v, i) => {
        const f = barFraction(v, i, DEFAULT_GAUGES);
        const el = bars[col][i];
        el.style.width = `${Math.abs(f) * 50}%`;
        el.style.left = f < 0 ? `${50 - Math.abs(f) * 50}%` : "50%";
        el.style.background = Math.abs(f) >= 1 ? "#e05555" : "#6a9ae0";
      });
    });
    contactDot.className = g.contact ? "on" : "";
    contactDot.textContent = g.contact ? `contact ${g.contactForce.toFixed(1)} N` : "no contact";
    // pad echo: handle truth from the snapshot, command from this client
    const f = input.frame();
    drawPad(padT, f[1] !== 0 ? -f[1] / 0.15 : 0, f[0] / 0.15, -snap.handle.p[1] / 0.15, snap.handle.p[0] / 0.15);
    drawPad(padR, f[4] / 0.4, -f[3] / 0.4, null, null);
  } else {
    const f = input.frame();
    drawPad(padT, -f[1] / 0.15, f[0] / 0.15, null, null);
    drawPad(padR, f[4] / 0.4, -f[3] / 0.4, null, null);
  }
  requestAnimationFrame(render);
}

requestAnimationFrame(render);
