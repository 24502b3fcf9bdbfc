"""Impedance-controlled vehicle and the contact environment at its tool tip.

The vehicle is rendered as the virtual mechanical system its on-board
controller imposes: a diagonal inertia/damping/stiffness acting on the
pose and twist errors relative to the reference trajectory, driven by
the external contact wrench. Gravity compensation and rotor allocation
are assumed ideal, so none of that appears here.

The environment is a single vertical plane with a penalty normal force
(spring plus approach-rate damping, never adhesive) and tanh-regularized
Coulomb friction at the tool tip. Point contact: the environment applies
no torque at the tip; the lever-arm torque about the vehicle body is
applied by the caller when it assembles the external wrench.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import NonFiniteState
from .geometry import Frame, Rotation, Vec3, Wrench, integrate_rotation, skew_part_vee
from .policy import ContactMeasurement, ReferenceState
from .station import Diag6, iso_diag6


def critically_damped(inertia: Diag6, stiffness: Diag6) -> Diag6:
    """Damping diagonal 2 sqrt(K M) per axis (zero where K is zero)."""
    return tuple(2.0 * math.sqrt(k * m) for k, m in zip(stiffness, inertia))


def _default_inertia() -> Diag6:
    return iso_diag6(4.0, 0.08)


def _default_stiffness() -> Diag6:
    return iso_diag6(100.0, 5.0)


@dataclass(frozen=True, slots=True)
class VehicleParams:
    """Virtual impedance diagonals plus the rigid tool offset.

    The defaults are placeholder tuning (light body, critically damped,
    moderate stiffness) chosen for stable tracking at a 1 ms step;
    scenarios override them. They are not measurements of any hardware.
    """

    virtual_inertia: Diag6 = field(default_factory=_default_inertia)
    virtual_damping: Diag6 = field(
        default_factory=lambda: critically_damped(_default_inertia(), _default_stiffness())
    )
    virtual_stiffness: Diag6 = field(default_factory=_default_stiffness)
    tool_offset: Vec3 = Vec3(0.6, 0.0, 0.0)

    def __post_init__(self) -> None:
        if any(m <= 0.0 for m in self.virtual_inertia):
            raise ValueError("virtual inertia entries must be > 0")
        if any(d <= 0.0 for d in self.virtual_damping):
            raise ValueError("virtual damping entries must be > 0")
        if any(k < 0.0 for k in self.virtual_stiffness):
            raise ValueError("virtual stiffness entries must be >= 0")


@dataclass(frozen=True, slots=True)
class VehicleState:
    """Vehicle rigid-body state: p, v in F_W; attitude; rate in F_S."""

    position: Vec3
    velocity: Vec3
    orientation: Rotation
    angular_rate: Vec3

    @staticmethod
    def rest(position: Vec3 = Vec3(0.0, 0.0, 0.0), orientation: Rotation | None = None) -> "VehicleState":
        return VehicleState(
            position, Vec3(0.0, 0.0, 0.0), orientation or Rotation.identity(), Vec3(0.0, 0.0, 0.0)
        )


@dataclass(frozen=True, slots=True)
class WallModel:
    """Vertical plane contact: penalty normal force + regularized friction.

    Points with (x - point) · normal < 0 are inside the material. v_eps
    is the stiction regularization velocity: tangential speeds well
    below it feel proportionally reduced friction, approximating stick;
    v_eps = 0 selects the unregularized (discontinuous) Coulomb law.
    """

    point: Vec3
    normal: Vec3
    normal_stiffness: float = 1000.0
    normal_damping: float = 50.0
    friction: float = 0.8
    v_eps: float = 1e-3

    def __post_init__(self) -> None:
        n = self.normal.norm()
        if abs(n - 1.0) > 1e-9:
            raise ValueError("wall normal must be unit length")
        if self.normal_stiffness < 0.0 or self.normal_damping < 0.0:
            raise ValueError("wall stiffness/damping must be >= 0")
        if self.friction < 0.0 or self.v_eps < 0.0:
            raise ValueError("friction coefficient and v_eps must be >= 0")


def tracking_errors(
    state: VehicleState, ref: ReferenceState
) -> tuple[Vec3, Vec3, Vec3, Vec3]:
    """Body-frame pose/twist errors (e_p, e_R, e_v, e_w) w.r.t. the reference.

    e_p = R_S^T (p_S - p_ref); e_R is the antisymmetric-part extraction
    of the relative attitude R_ref^T R_S; e_v = R_S^T (v_S - v_ref);
    e_w = w_S - (R_S^T R_ref) w_ref.
    """
    r = state.orientation
    e_p = r.rotate_inv(state.position - ref.position)
    rel = ref.orientation.inverse().compose(r)
    e_r = skew_part_vee(rel)
    e_v = r.rotate_inv(state.velocity - ref.velocity)
    e_w = state.angular_rate - rel.rotate_inv(ref.angular_rate)
    return e_p, e_r, e_v, e_w


def impedance_step(
    state: VehicleState,
    ref: ReferenceState,
    w_ext: Wrench,
    params: VehicleParams,
    dt: float,
) -> VehicleState:
    """One semi-implicit step of M a = w_ext - D e_twist - K e_pose.

    Acceleration is solved per axis in the body frame, rotated into the
    world for the linear part; velocity advances first, then the pose
    integrates with the new velocity (position in world, attitude via
    the exact per-step exponential).
    """
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must lie in (0, 0.01]")
    if w_ext.frame is not Frame.BODY:
        raise ValueError("external wrench must be expressed in the body frame")
    e_p, e_r, e_v, e_w = tracking_errors(state, ref)
    m = params.virtual_inertia
    d = params.virtual_damping
    k = params.virtual_stiffness
    a_lin = Vec3(
        (w_ext.force.x - d[0] * e_v.x - k[0] * e_p.x) / m[0],
        (w_ext.force.y - d[1] * e_v.y - k[1] * e_p.y) / m[1],
        (w_ext.force.z - d[2] * e_v.z - k[2] * e_p.z) / m[2],
    )
    a_ang = Vec3(
        (w_ext.torque.x - d[3] * e_w.x - k[3] * e_r.x) / m[3],
        (w_ext.torque.y - d[4] * e_w.y - k[4] * e_r.y) / m[4],
        (w_ext.torque.z - d[5] * e_w.z - k[5] * e_r.z) / m[5],
    )
    r = state.orientation
    a_world = r.rotate(a_lin)
    v = state.velocity
    v_new = Vec3(v.x + dt * a_world.x, v.y + dt * a_world.y, v.z + dt * a_world.z)
    w = state.angular_rate
    w_new = Vec3(w.x + dt * a_ang.x, w.y + dt * a_ang.y, w.z + dt * a_ang.z)
    p = state.position
    p_new = Vec3(p.x + dt * v_new.x, p.y + dt * v_new.y, p.z + dt * v_new.z)
    r_new = integrate_rotation(r, w_new, dt)
    if not (p_new.is_finite() and v_new.is_finite() and r_new.is_finite() and w_new.is_finite()):
        raise NonFiniteState("vehicle integration produced non-finite values")
    return VehicleState(p_new, v_new, r_new, w_new)


def tool_tip_state(state: VehicleState, tool_offset: Vec3) -> tuple[Vec3, Vec3]:
    """World-frame position and velocity of the rigidly attached tool tip."""
    r = state.orientation
    pos = state.position + r.rotate(tool_offset)
    vel = state.velocity + r.rotate(state.angular_rate.cross(tool_offset))
    return pos, vel


def contact_wrench(
    tip_pos: Vec3, tip_vel: Vec3, wall: WallModel, state: VehicleState
) -> ContactMeasurement:
    """Penalty contact force at the tip, reported in the body frame.

    Normal part: stiffness times penetration plus damping times approach
    rate, clipped so separation never produces adhesion. Tangential
    part: Coulomb friction with magnitude mu |f_n| tanh(|v_t|/v_eps),
    opposing the tangential tip velocity. Point contact carries no
    torque of its own.
    """
    n = wall.normal
    depth = -(tip_pos - wall.point).dot(n)
    if depth <= 0.0:
        return ContactMeasurement.zero()
    v_n = tip_vel.dot(n)
    approach = -v_n if v_n < 0.0 else 0.0
    f_n_mag = wall.normal_stiffness * depth + wall.normal_damping * approach
    f = n.scale(f_n_mag)
    v_t = tip_vel - n.scale(v_n)
    speed = v_t.norm()
    if speed > 0.0 and wall.friction > 0.0:
        ratio = math.tanh(speed / wall.v_eps) if wall.v_eps > 0.0 else 1.0
        f_t_mag = wall.friction * f_n_mag * ratio
        f = f - v_t.scale(f_t_mag / speed)
    return ContactMeasurement(state.orientation.rotate_inv(f), Vec3(0.0, 0.0, 0.0))


def external_wrench(contact: ContactMeasurement, tool_offset: Vec3) -> Wrench:
    """Contact wrench moved from the tip to the body: torque r_ST x f added."""
    lever = tool_offset.cross(contact.force)
    return Wrench(contact.force, contact.torque + lever, Frame.BODY)
