"""Scripted studies on the closed loop: single-axis decoupling trials
with optional operator tremor, and a push-and-slide contact run.

Decoupling: each scheduled axis is actuated with a smoothstep wrench
pulse in a fresh world (station, reference, vehicle reset per segment),
so the measured reference twist isolates the policy's axis coupling
instead of compounding attitude from earlier segments. An ideal scripted
operator yields exactly zero off-axis response; a seeded
Ornstein-Uhlenbeck tremor wrench emulates human cross-talk and produces
graded, reproducible coupling ratios.

Push-and-slide: the handle is pose-scripted through approach, press,
hold, slide-up, pause, slide-down phases against the configured wall.
Phase segmentation comes from the script itself, so the report is
deterministic. Signs follow the physical picture: the felt force opposes
the approach, and sliding drags the tool behind the body, flipping the
felt torque about the body y axis with the slide direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import AXES, DecouplingSpec, PushSlideSpec, SimConfig
from .engine import MODE_POSE, MODE_WRENCH
from .errors import NoContact
from .orchestrator import run

PHASE_NAMES = ("approach", "press", "hold", "slide_up", "pause", "slide_down")


@dataclass(frozen=True, slots=True)
class AxisCoupling:
    """Cross-axis leakage statistics for one commanded axis."""

    axis: str
    on_axis_peak_mean: float
    on_axis_peak_std: float
    off_axis_peak_means: tuple[float, float, float, float, float]
    ratio_mean: float
    ratio_std: float
    ratios: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.on_axis_peak_mean <= 0.0:
            raise ValueError(f"axis {self.axis}: no on-axis response; trial is invalid")
        if any(r < 0.0 for r in self.ratios):
            raise ValueError("coupling ratios must be >= 0")


@dataclass(frozen=True, slots=True)
class CouplingReport:
    """Per-axis coupling statistics across repetitions."""

    axes: tuple[AxisCoupling, ...]
    repetitions: int
    tremor_amplitude: float

    def worst_ratio(self) -> float:
        return max(a.ratio_mean for a in self.axes)

    def by_axis(self, axis: str) -> AxisCoupling:
        for a in self.axes:
            if a.axis == axis:
                return a
        raise KeyError(axis)


@dataclass(frozen=True, slots=True, eq=False)
class PushSlideReport:
    """Contact-run metrics; alpha is the (t, misalignment angle) series."""

    contact_onset: float
    push_force_mean: float
    push_force_std: float
    slide_up_torque_mean: float
    slide_down_torque_mean: float
    phases: tuple[tuple[str, float, float], ...]
    alpha: np.ndarray

    def phase_range(self, name: str) -> tuple[float, float]:
        for phase, t0, t1 in self.phases:
            if phase == name:
                return t0, t1
        raise KeyError(name)


def smoothstep_pulse(n: int, ramp: int) -> np.ndarray:
    """Unit pulse: cubic smoothstep up over ramp ticks, hold, mirror down."""
    if n <= 0:
        return np.zeros(0)
    ramp = max(1, min(ramp, n // 2))
    u = np.minimum(np.arange(n) / ramp, 1.0)
    up = u * u * (3.0 - 2.0 * u)
    return np.minimum(up, up[::-1])


def ou_tremor(n: int, dt: float, amplitude: float, tau: float, rng: np.random.Generator) -> np.ndarray:
    """(n, 6) Ornstein-Uhlenbeck wrench noise with stationary std = amplitude.

    Zero amplitude consumes no randomness, so noise-free trials are
    reproducible no matter how seeds are assigned.
    """
    if amplitude == 0.0:
        return np.zeros((n, 6))
    z = rng.normal(0.0, 1.0, size=(n, 6))
    drive = amplitude * math.sqrt(2.0 * dt / tau)
    decay = 1.0 - dt / tau
    x = np.zeros(6)
    out = np.empty((n, 6))
    for k in range(n):
        x = x * decay + drive * z[k]
        out[k] = x
    return out


def _segment_peaks(rows: np.ndarray, on_idx: int) -> tuple[float, np.ndarray]:
    """Peak |reference twist| on the commanded channel and the other five."""
    twists = np.abs(rows[:, 21:27])  # v_ref (world), w_ref (body)
    peaks = twists.max(axis=0)
    off = np.delete(peaks, on_idx)
    return float(peaks[on_idx]), off


def run_decoupling(
    config: SimConfig, trial: DecouplingSpec | None = None
) -> tuple[CouplingReport, list[np.ndarray]]:
    """Scripted single-axis trials; returns the report and per-rep rows.

    Requires free flight (no wall), so the feedback is recentering only.
    Per-rep rows concatenate the segments with times offset to their
    schedule position, ready for logging or plot emission.
    """
    if config.wall is not None:
        raise ValueError("decoupling trials require free flight; remove the wall block")
    if trial is None:
        trial = config.experiment if isinstance(config.experiment, DecouplingSpec) else DecouplingSpec()

    n_total = config.ticks()
    per_axis_on: dict[str, list[float]] = {seg[0]: [] for seg in trial.schedule}
    per_axis_off: dict[str, list[np.ndarray]] = {seg[0]: [] for seg in trial.schedule}
    rep_rows: list[np.ndarray] = []

    for rep in range(trial.repetitions):
        rng = np.random.default_rng([config.seed, rep])
        chunks = []
        for axis, f0, f1 in trial.schedule:
            seg_n = max(1, round((f1 - f0) * n_total))
            on_idx = AXES.index(axis)
            mag = trial.pulse_force if on_idx < 3 else trial.pulse_torque
            cmds = ou_tremor(seg_n, config.dt, trial.tremor_amplitude,
                             trial.tremor_correlation_time, rng)
            cmds[:, on_idx] += mag * smoothstep_pulse(seg_n, round(0.1 * seg_n))
            modes = np.full(seg_n, MODE_WRENCH, dtype=np.int8)

            seg_cfg = config.with_overrides(duration=seg_n * config.dt, decimation=1)
            rows = run(seg_cfg, modes, cmds, write=False).rows
            on_peak, off_peaks = _segment_peaks(rows, on_idx)
            per_axis_on[axis].append(on_peak)
            per_axis_off[axis].append(off_peaks)

            shifted = rows.copy()
            shifted[:, 0] += f0 * n_total * config.dt
            chunks.append(shifted)
        rep_rows.append(np.vstack(chunks))

    axes = []
    for axis, f0, f1 in trial.schedule:
        on = np.array(per_axis_on[axis])
        off = np.vstack(per_axis_off[axis])
        ratios = off.max(axis=1) / on
        axes.append(AxisCoupling(
            axis=axis,
            on_axis_peak_mean=float(on.mean()),
            on_axis_peak_std=float(on.std()),
            off_axis_peak_means=tuple(float(x) for x in off.mean(axis=0)),
            ratio_mean=float(ratios.mean()),
            ratio_std=float(ratios.std()),
            ratios=tuple(float(r) for r in ratios),
        ))
    report = CouplingReport(
        axes=tuple(axes),
        repetitions=trial.repetitions,
        tremor_amplitude=trial.tremor_amplitude,
    )
    return report, rep_rows


def _quat_rotate_rows(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate row vectors v by row quaternions q (w, x, y, z)."""
    xyz = q[:, 1:4]
    t = 2.0 * np.cross(xyz, v)
    return v + q[:, 0:1] * t + np.cross(xyz, t)


def push_slide_script(spec: PushSlideSpec, dt: float) -> tuple[np.ndarray, np.ndarray, list[tuple[str, int, int]]]:
    """Pose-mode command stream and (name, start, end) tick spans.

    The handle is pinned at +x to approach (the body x axis carries the
    tool), deeper +x to press, center to hold, +/-z to slide.
    """
    phase_list = [
        ("approach", spec.approach_duration, (spec.approach_handle, 0.0)),
        ("press", spec.press_duration, (spec.press_handle, 0.0)),
        ("hold", spec.hold_duration, (0.0, 0.0)),
        ("slide_up", spec.slide_duration, (0.0, spec.slide_handle)),
        ("pause", spec.pause_duration, (0.0, 0.0)),
        ("slide_down", spec.slide_duration, (0.0, -spec.slide_handle)),
    ]
    spans = []
    cmd_rows = []
    start = 0
    for name, dur, (hx, hz) in phase_list:
        ticks = max(1, round(dur / dt))
        spans.append((name, start, start + ticks))
        row = np.zeros(6)
        row[0] = hx
        row[2] = hz
        cmd_rows.append(np.tile(row, (ticks, 1)))
        start += ticks
    cmds = np.vstack(cmd_rows)
    modes = np.full(start, MODE_POSE, dtype=np.int8)
    return modes, cmds, spans


def run_push_slide(config: SimConfig) -> tuple[PushSlideReport, np.ndarray]:
    """Scripted contact run; returns the report and full-rate rows.

    The run length comes from the phase script, not config.duration.
    Raises NoContact when the approach/press/hold script never touches
    the wall, and RuntimeError when the feedback sign pattern is wrong.
    """
    wall = config.wall
    if wall is None:
        raise ValueError("push-and-slide requires a wall block")
    spec = config.experiment if isinstance(config.experiment, PushSlideSpec) else PushSlideSpec()

    modes, cmds, spans = push_slide_script(spec, config.dt)
    n = len(modes)
    cfg = config.with_overrides(duration=n * config.dt, decimation=1)
    rows = run(cfg, modes, cmds, write=False).rows

    contact_norm = np.sqrt(np.sum(rows[:, 40:43] ** 2, axis=1))
    touching = np.nonzero(contact_norm > 0.0)[0]
    hold_end = spans[2][2]
    if touching.size == 0 or touching[0] >= hold_end:
        raise NoContact(
            f"scripted approach never reached the wall within {hold_end * config.dt:.3f} s"
        )
    onset = float(rows[touching[0], 0])

    # normal force component in the world frame; stats over the settled
    # part of the hold phase (first third is skipped as ring-down)
    n_hat = np.array([wall.normal.x, wall.normal.y, wall.normal.z])
    f_world = _quat_rotate_rows(rows[:, 30:34], rows[:, 40:43])
    f_normal = f_world @ n_hat
    h0, h1 = spans[2][1], spans[2][2]
    s0 = h0 + (h1 - h0) // 3
    push_mean = float(np.mean(f_normal[s0:h1]))
    push_std = float(np.std(f_normal[s0:h1]))

    u0, u1 = spans[3][1], spans[3][2]
    d0, d1 = spans[5][1], spans[5][2]
    up_tau = float(np.mean(rows[u0:u1, 62]))  # felt torque about body y
    down_tau = float(np.mean(rows[d0:d1, 62]))

    # misalignment angle between the tool rod and the into-wall direction
    rod_body = np.array([config.vehicle.tool_offset.x,
                         config.vehicle.tool_offset.y,
                         config.vehicle.tool_offset.z])
    rod_len = float(np.linalg.norm(rod_body))
    if rod_len == 0.0:
        raise ValueError("push-and-slide needs a nonzero tool offset")
    rod_body = rod_body / rod_len
    rod_world = _quat_rotate_rows(rows[:, 30:34], np.tile(rod_body, (rows.shape[0], 1)))
    cos_alpha = np.clip(rod_world @ (-n_hat), -1.0, 1.0)
    alpha = np.column_stack([rows[:, 0], np.arccos(cos_alpha)])

    # the felt force must oppose the approach command (+x on the handle)
    if np.mean(rows[h0:h1, 58]) >= 0.0:
        raise RuntimeError("push feedback does not oppose the approach direction")
    if wall.friction > 0.0 and not (up_tau > 0.0 > down_tau):
        raise RuntimeError(
            f"slide torque signs violate the drag pattern (up {up_tau:.3f}, down {down_tau:.3f})"
        )

    report = PushSlideReport(
        contact_onset=onset,
        push_force_mean=push_mean,
        push_force_std=push_std,
        slide_up_torque_mean=up_tau,
        slide_down_torque_mean=down_tau,
        phases=tuple((name, s * config.dt, e * config.dt) for name, s, e in spans),
        alpha=alpha,
    )
    return report, rows


def _rotvec_cols(q: np.ndarray) -> np.ndarray:
    """Rotation vectors from quaternion rows, stable near identity."""
    s = np.sqrt(np.sum(q[:, 1:4] ** 2, axis=1))
    angle = 2.0 * np.arctan2(s, np.abs(q[:, 0:1]).ravel())
    sign = np.where(q[:, 0] < 0.0, -1.0, 1.0)
    scale = np.where(s > 1e-12, angle / np.maximum(s, 1e-300), 2.0 * sign)
    return q[:, 1:4] * (sign * scale)[:, None]


DECOUPLING_COLUMNS = (
    "t_norm",
    "p_ref_x", "p_ref_y", "p_ref_z", "rv_ref_x", "rv_ref_y", "rv_ref_z",
    "v_ref_x", "v_ref_y", "v_ref_z", "w_ref_x", "w_ref_y", "w_ref_z",
    "fb_fx", "fb_fy", "fb_fz", "fb_tx", "fb_ty", "fb_tz",
)

PUSH_SLIDE_COLUMNS = (
    "t_norm",
    "p_ref_x", "p_ref_y", "p_ref_z", "p_s_x", "p_s_y", "p_s_z",
    "f_k_x", "f_k_y", "f_k_z", "tau_k_x", "tau_k_y", "tau_k_z",
    "fb_fx", "fb_fy", "fb_fz", "fb_tx", "fb_ty", "fb_tz",
)


def emit_plot_data(rows: np.ndarray, path: str, kind: str) -> None:
    """Write plain-text columns (one header line) for a figure pipeline.

    kind 'decoupling': normalized time, reference pose (position +
    rotation vector) and twist, feedback wrench. kind 'push_slide':
    normalized time, reference/vehicle positions, contact wrench,
    feedback wrench, misalignment angle. Empty input writes the header
    only.
    """
    if kind == "decoupling":
        header = DECOUPLING_COLUMNS
    elif kind == "push_slide":
        header = PUSH_SLIDE_COLUMNS
    else:
        raise ValueError("kind must be 'decoupling' or 'push_slide'")

    if rows.shape[0] == 0:
        data = np.zeros((0, len(header)))
    else:
        t = rows[:, 0]
        span = t[-1] - t[0]
        t_norm = (t - t[0]) / span if span > 0.0 else np.zeros_like(t)
        if kind == "decoupling":
            data = np.column_stack([
                t_norm, rows[:, 14:17], _rotvec_cols(rows[:, 17:21]),
                rows[:, 21:27], rows[:, 58:64],
            ])
        else:
            data = np.column_stack([
                t_norm, rows[:, 14:17], rows[:, 27:30],
                rows[:, 40:46], rows[:, 58:64],
            ])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(header) + "\n")
        np.savetxt(fh, data, fmt="%.17g")
