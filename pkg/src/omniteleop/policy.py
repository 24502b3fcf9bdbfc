"""Teleoperation law: handle displacement to vehicle rate references,
plus the haptic feedback wrench the operator feels.

Displacement-to-rate mapping (rate control): the handle position scales
linearly into a commanded body-frame linear velocity, and the handle
attitude maps through the antisymmetric-part extraction into a body
rate, so the commanded rate is sin(angle)-saturated with its peak at a
90 degree handle rotation. References integrate these commands into a
world-frame pose trajectory for the vehicle to track.

Feedback is the sum of a recentering spring pulling the handle to its
idle pose and the pass-through of the measured interaction wrench,
translated from the tool tip to the vehicle body frame by the rigid-rod
offset. Handle and vehicle body axes are treated as aligned, so both
terms are expressed directly in the device idle frame F_M.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import Frame, Pose, Rotation, Twist, Vec3, Wrench, integrate_rotation, skew_part_vee
from .station import Diag6, StationState, iso_diag6


@dataclass(frozen=True, slots=True)
class PolicyParams:
    """Rate gains, recentering stiffness, tool offset, deadband floor.

    v_max [1/s] scales handle meters into m/s; omega_max [1/s]
    scales the attitude extraction into rad/s and bounds the commanded
    rate magnitude. The deadband zeroes
    handle displacements below a position/rotation floor before
    reference generation so numerical noise at center cannot drift the
    reference; it never touches the recentering spring.
    """

    v_max: float = 1.0
    omega_max: float = 1.0
    recenter_stiffness: Diag6 = field(default_factory=lambda: iso_diag6(50.0, 2.0))
    tool_offset: Vec3 = Vec3(0.6, 0.0, 0.0)
    deadband_position: float = 1e-3
    deadband_rotation: float = 1e-3
    deadband_enabled: bool = True

    def __post_init__(self) -> None:
        if self.v_max <= 0.0 or self.omega_max <= 0.0:
            raise ValueError("rate-control gains must be > 0")
        if any(k < 0.0 for k in self.recenter_stiffness):
            raise ValueError("recentering stiffness entries must be >= 0")
        if self.tool_offset.norm() >= 2.0:
            raise ValueError("tool offset must be shorter than 2 m")
        if self.deadband_position < 0.0 or self.deadband_rotation < 0.0:
            raise ValueError("deadband thresholds must be >= 0")


@dataclass(frozen=True, slots=True)
class ReferenceState:
    """Integrated reference trajectory the vehicle tracks.

    position/velocity in F_W; angular_rate in the reference body frame.
    """

    position: Vec3
    velocity: Vec3
    orientation: Rotation
    angular_rate: Vec3

    @staticmethod
    def at(pose: Pose) -> "ReferenceState":
        return ReferenceState(pose.position, Vec3(0.0, 0.0, 0.0), pose.orientation, Vec3(0.0, 0.0, 0.0))


@dataclass(frozen=True, slots=True)
class ContactMeasurement:
    """Environment wrench at the tool tip, expressed in the body frame F_S."""

    force: Vec3
    torque: Vec3

    @staticmethod
    def zero() -> "ContactMeasurement":
        return ContactMeasurement(Vec3(0.0, 0.0, 0.0), Vec3(0.0, 0.0, 0.0))


def apply_deadband(pose: Pose, params: PolicyParams) -> Pose:
    """Snap sub-threshold handle displacement to exact center."""
    if not params.deadband_enabled:
        return pose
    p = pose.position
    if p.norm() < params.deadband_position:
        p = Vec3(0.0, 0.0, 0.0)
    r = pose.orientation
    if r.angle() < params.deadband_rotation:
        r = Rotation.identity()
    return Pose(p, r)


def velocity_reference(handle: StationState, params: PolicyParams) -> Vec3:
    """Commanded body-frame linear velocity: gain times handle position."""
    p = handle.pose.position
    return Vec3(params.v_max * p.x, params.v_max * p.y, params.v_max * p.z)


def rate_reference(handle: StationState, params: PolicyParams) -> Vec3:
    """Commanded body rate: gain times the attitude antisymmetric part.

    Magnitude follows sin(handle angle), so it peaks at 90 degrees and
    decreases beyond; the station's rotation limit keeps handles below
    that peak, where the mapping is injective.
    """
    s = skew_part_vee(handle.pose.orientation)
    return Vec3(params.omega_max * s.x, params.omega_max * s.y, params.omega_max * s.z)


def integrate_references(
    ref: ReferenceState, v_ref_body: Vec3, w_ref_body: Vec3, dt: float
) -> ReferenceState:
    """Advance the reference pose by one tick of body-frame commands.

    The commanded linear velocity is rotated through the current
    reference attitude before integrating, so the stored position and
    velocity are world-frame quantities; the rate integrates on the
    right (body frame) via the exact per-step exponential.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    v_world = ref.orientation.rotate(v_ref_body)
    p = Vec3(
        ref.position.x + dt * v_world.x,
        ref.position.y + dt * v_world.y,
        ref.position.z + dt * v_world.z,
    )
    r = integrate_rotation(ref.orientation, w_ref_body, dt)
    return ReferenceState(p, v_world, r, w_ref_body)


def recentering_wrench(handle: StationState, params: PolicyParams) -> Wrench:
    """Spring pulling the handle to idle: minus stiffness times displacement.

    The rotational displacement uses the same antisymmetric-part
    extraction as the rate law, so spring torque also saturates at a
    90 degree handle angle. Expressed in F_M.
    """
    k = params.recenter_stiffness
    p = handle.pose.position
    s = skew_part_vee(handle.pose.orientation)
    return Wrench(
        Vec3(-(k[0] * p.x), -(k[1] * p.y), -(k[2] * p.z)),
        Vec3(-(k[3] * s.x), -(k[4] * s.y), -(k[5] * s.z)),
        Frame.IDLE,
    )


def interaction_feedback(contact: ContactMeasurement, params: PolicyParams) -> Wrench:
    """Environment wrench felt at the handle: tip force moved to the body.

    force = f_K; torque = tau_K + r_ST x f_K, with handle axes taken
    aligned with the vehicle body axes. Expressed in F_M.
    """
    f = contact.force
    tq = params.tool_offset.cross(f)
    return Wrench(
        f,
        Vec3(contact.torque.x + tq.x, contact.torque.y + tq.y, contact.torque.z + tq.z),
        Frame.IDLE,
    )


def total_feedback(recenter: Wrench, interaction: Wrench) -> Wrench:
    """Componentwise sum of the two feedback contributions."""
    return recenter + interaction
