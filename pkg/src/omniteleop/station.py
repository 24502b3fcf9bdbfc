"""Local haptic station: human operator plus admittance-controlled handle.

The operator and the device are two damped rigid bodies coupled through
the grasp. Under a rigid grasp they share one twist, so the module sums
the two equations of motion and eliminates the internal grasp wrench,
which is reconstructed separately for logging (:func:`internal_wrench`).

Frames: the handle pose is expressed relative to the device idle frame
F_M; the handle twist and the operator's applied wrench live in the
current handle frame F_H; feedback wrenches arrive expressed in F_M and
are re-expressed internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import NonFiniteState
from .geometry import (
    Frame,
    Pose,
    Rotation,
    Twist,
    Vec3,
    Wrench,
    exp_so3,
    integrate_rotation,
)

Diag6 = tuple[float, float, float, float, float, float]


def iso_diag6(translational: float, rotational: float) -> Diag6:
    """Isotropic 6x6 diagonal: one value per translational/rotational block."""
    return (translational, translational, translational, rotational, rotational, rotational)


ZERO6: Diag6 = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class StationParams:
    """Inertia/damping diagonals plus the invented safety rails.

    Human terms default to zero (pure-device mode) and act purely
    additively; admittance terms must be strictly positive.  The
    workspace radius, rotation limit, and wrench clamps have no physical
    counterpart in the model; they stand in for device joint limits.
    The rotation limit must stay below 90 degrees so the rate mapping
    downstream remains injective.
    """

    human_inertia: Diag6 = ZERO6
    human_damping: Diag6 = ZERO6
    admittance_inertia: Diag6 = field(default_factory=lambda: iso_diag6(10.0, 1.0))
    admittance_damping: Diag6 = field(default_factory=lambda: iso_diag6(5.0, 1.0))
    workspace_radius: float = 0.3
    rotation_limit: float = 1.4
    force_limit: float = 200.0
    torque_limit: float = 20.0

    def __post_init__(self) -> None:
        if any(m <= 0.0 for m in self.admittance_inertia):
            raise ValueError("admittance inertia entries must be > 0")
        if any(d <= 0.0 for d in self.admittance_damping):
            raise ValueError("admittance damping entries must be > 0")
        if any(m < 0.0 for m in self.human_inertia) or any(d < 0.0 for d in self.human_damping):
            raise ValueError("human inertia/damping entries must be >= 0")
        if not self.workspace_radius > 0.0:
            raise ValueError("workspace radius must be > 0")
        if not 0.0 < self.rotation_limit < math.pi / 2.0:
            raise ValueError("rotation limit must lie in (0, pi/2)")
        if self.force_limit <= 0.0 or self.torque_limit <= 0.0:
            raise ValueError("wrench clamps must be > 0")

    def total_inertia(self) -> Diag6:
        return tuple(h + a for h, a in zip(self.human_inertia, self.admittance_inertia))

    def total_damping(self) -> Diag6:
        return tuple(h + a for h, a in zip(self.human_damping, self.admittance_damping))


@dataclass(frozen=True, slots=True)
class StationState:
    """Handle pose (F_H relative to F_M) and twist (expressed in F_H)."""

    pose: Pose
    twist: Twist

    def __post_init__(self) -> None:
        if self.twist.frame is not Frame.HANDLE:
            raise ValueError("station twist must be expressed in the handle frame")

    @staticmethod
    def rest() -> "StationState":
        return StationState(Pose.identity(), Twist.zero(Frame.HANDLE))


@dataclass(frozen=True, slots=True)
class OperatorCommand:
    """Active wrench the operator applies to the handle, in F_H."""

    wrench: Wrench
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if self.wrench.frame is not Frame.HANDLE:
            raise ValueError("operator wrench must be expressed in the handle frame")


def clamp_command(w: Wrench, params: StationParams) -> Wrench:
    """Scale force/torque down to the configured magnitude limits."""
    f, t = w.force, w.torque
    fn = f.norm()
    if fn > params.force_limit:
        f = f.scale(params.force_limit / fn)
    tn = t.norm()
    if tn > params.torque_limit:
        t = t.scale(params.torque_limit / tn)
    return Wrench(f, t, w.frame)


def _feedback_in_handle(state: StationState, feedback: Wrench) -> Wrench:
    if feedback.frame is Frame.HANDLE:
        return feedback
    if feedback.frame is not Frame.IDLE:
        raise ValueError("station feedback must be expressed in F_M or F_H")
    r = state.pose.orientation
    return Wrench(r.rotate_inv(feedback.force), r.rotate_inv(feedback.torque), Frame.HANDLE)


def station_accel(
    state: StationState, cmd: Wrench, feedback: Wrench, params: StationParams
) -> tuple[Vec3, Vec3]:
    """Combined-body acceleration: ((M_h+M_a) a = f_a + w_fb - (D_h+D_a) v).

    `cmd` must already be clamped and in F_H; `feedback` in F_M or F_H.
    Returned as (linear, angular), both in F_H.
    """
    fb = _feedback_in_handle(state, feedback)
    m = params.total_inertia()
    d = params.total_damping()
    v, w = state.twist.linear, state.twist.angular
    return (
        Vec3(
            (cmd.force.x + fb.force.x - d[0] * v.x) / m[0],
            (cmd.force.y + fb.force.y - d[1] * v.y) / m[1],
            (cmd.force.z + fb.force.z - d[2] * v.z) / m[2],
        ),
        Vec3(
            (cmd.torque.x + fb.torque.x - d[3] * w.x) / m[3],
            (cmd.torque.y + fb.torque.y - d[4] * w.y) / m[4],
            (cmd.torque.z + fb.torque.z - d[5] * w.z) / m[5],
        ),
    )


def _clamp_position(p: Vec3, v_m: Vec3, radius: float, dt: float) -> tuple[Vec3, Vec3]:
    """Kill outward radial velocity at the workspace sphere; returns (p', v_m')."""
    p_next = p + v_m.scale(dt)
    if not math.isfinite(radius) or p_next.norm() <= radius:
        return p_next, v_m
    pn = p.norm()
    n = p.scale(1.0 / pn) if pn > 0.0 else p_next.scale(1.0 / p_next.norm())
    out = v_m.dot(n)
    if out > 0.0:
        v_m = v_m - n.scale(out)
        p_next = p + v_m.scale(dt)
    r = p_next.norm()
    if r > radius:
        # tangential motion on the sphere still creeps outward by O(dt^2)
        p_next = p_next.scale(radius / r)
    return p_next, v_m


def _clamp_rotation(r: Rotation, w: Vec3, limit: float, dt: float) -> tuple[Rotation, Vec3]:
    """Kill the rate component that grows the handle angle past the limit."""
    r_next = integrate_rotation(r, w, dt)
    if r_next.angle() <= limit:
        return r_next, w
    s = math.sqrt(r.x * r.x + r.y * r.y + r.z * r.z)
    if s > 0.0:
        axis = Vec3(r.x / s, r.y / s, r.z / s)
        out = w.dot(axis)
        if out > 0.0:
            w = w - axis.scale(out)
            r_next = integrate_rotation(r, w, dt)
    ang = r_next.angle()
    if ang > limit:
        sn = math.sqrt(r_next.x * r_next.x + r_next.y * r_next.y + r_next.z * r_next.z)
        u = Vec3(r_next.x / sn, r_next.y / sn, r_next.z / sn)
        r_next = exp_so3(u.scale(limit))
    return r_next, w


def clamp_pose(position: Vec3, rotvec: Vec3, params: StationParams) -> Pose:
    """Project a commanded handle pose into the workspace limits.

    Used when the handle is position-driven instead of force-driven:
    the position is scaled back to the workspace sphere and the rotation
    vector to the rotation limit before exponentiating.
    """
    pn = position.norm()
    if math.isfinite(params.workspace_radius) and pn > params.workspace_radius:
        position = position.scale(params.workspace_radius / pn)
    ang = rotvec.norm()
    if ang > params.rotation_limit:
        rotvec = rotvec.scale(params.rotation_limit / ang)
    if ang > 0.0:
        orientation = exp_so3(rotvec)
    else:
        orientation = Rotation.identity()
    return Pose(position, orientation)


def station_step(
    state: StationState,
    cmd: OperatorCommand,
    feedback: Wrench,
    params: StationParams,
    dt: float,
) -> StationState:
    """One semi-implicit Euler step of the coupled operator/device body.

    Velocity is advanced first with forces evaluated at the current
    state, then the pose is advanced with the new velocity; position
    uses p <- p + R v dt (handle-frame velocity rotated out), attitude
    uses the exact per-step rotation exponential. Workspace and rotation
    limits act on velocity, never by teleporting the pose.
    """
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must lie in (0, 0.01]")
    wrench = clamp_command(cmd.wrench, params)
    acc_lin, acc_ang = station_accel(state, wrench, feedback, params)

    tw = state.twist
    v_new = Vec3(tw.linear.x + dt * acc_lin.x, tw.linear.y + dt * acc_lin.y, tw.linear.z + dt * acc_lin.z)
    w_new = Vec3(tw.angular.x + dt * acc_ang.x, tw.angular.y + dt * acc_ang.y, tw.angular.z + dt * acc_ang.z)

    r = state.pose.orientation
    v_m = r.rotate(v_new)
    p_next, v_m = _clamp_position(state.pose.position, v_m, params.workspace_radius, dt)
    v_new = r.rotate_inv(v_m)

    r_next, w_new = _clamp_rotation(r, w_new, params.rotation_limit, dt)

    if not (p_next.is_finite() and r_next.is_finite() and v_new.is_finite() and w_new.is_finite()):
        raise NonFiniteState("station integration produced non-finite values")
    return StationState(Pose(p_next, r_next), Twist(v_new, w_new, Frame.HANDLE))


def internal_wrench(
    state: StationState,
    accel: tuple[Vec3, Vec3],
    feedback: Wrench,
    params: StationParams,
) -> Wrench:
    """Grasp wrench the hand exerts on the device: f_h = M_a a + D_a v - w_fb.

    `state` and `accel` must be the pre-step state and the acceleration
    computed from it, so the reconstruction matches the device equation
    the step actually integrated. Result in F_H.
    """
    fb = _feedback_in_handle(state, feedback)
    m = params.admittance_inertia
    d = params.admittance_damping
    v, w = state.twist.linear, state.twist.angular
    al, aa = accel
    return Wrench(
        Vec3(
            m[0] * al.x + d[0] * v.x - fb.force.x,
            m[1] * al.y + d[1] * v.y - fb.force.y,
            m[2] * al.z + d[2] * v.z - fb.force.z,
        ),
        Vec3(
            m[3] * aa.x + d[3] * w.x - fb.torque.x,
            m[4] * aa.y + d[4] * w.y - fb.torque.y,
            m[5] * aa.z + d[5] * w.z - fb.torque.z,
        ),
        Frame.HANDLE,
    )
