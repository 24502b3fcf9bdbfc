"""Frame-safe SO(3)/SE(3) primitives used by every other module.

Conventions
-----------
- Quaternions are scalar-first ``(w, x, y, z)``, Hamilton product, unit norm,
  canonical sign ``w >= 0``; a ``Rotation`` maps body-frame vectors into its
  parent frame (``v_parent = R * v_body``).
- Rotations are stored as quaternions to keep norm drift bounded over long
  runs; 3x3 matrices are materialized only where a computation is defined on
  the matrix itself (``skew_part_vee`` and the attitude-error extraction).
- All vectors carry their frame by convention of the call site; ``Twist`` and
  ``Wrench`` additionally carry an explicit frame tag that consuming
  operations check.

All types are immutable values and all functions are pure, so everything here
is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import NotSkewSymmetric

Mat3 = tuple[tuple[float, float, float], tuple[float, float, float], tuple[float, float, float]]


class Frame(Enum):
    """Frame of expression for twists and wrenches."""

    WORLD = "world"    # F_W, inertial, z up
    BODY = "body"      # F_S, vehicle body, x along the tool
    IDLE = "idle"      # F_M, haptic handle idle pose (master)
    HANDLE = "handle"  # F_H, current handle pose


@dataclass(frozen=True, slots=True)
class Vec3:
    """3-vector; units depend on context (m, m/s, rad/s, N, N·m)."""

    x: float
    y: float
    z: float

    def __add__(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x + o.x, self.y + o.y, self.z + o.z)

    def __sub__(self, o: "Vec3") -> "Vec3":
        return Vec3(self.x - o.x, self.y - o.y, self.z - o.z)

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def scale(self, s: float) -> "Vec3":
        return Vec3(s * self.x, s * self.y, s * self.z)

    def dot(self, o: "Vec3") -> float:
        return self.x * o.x + self.y * o.y + self.z * o.z

    def cross(self, o: "Vec3") -> "Vec3":
        return Vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def is_finite(self) -> bool:
        return math.isfinite(self.x + self.y + self.z)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


ZERO3 = Vec3(0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class Rotation:
    """Unit quaternion (w, x, y, z), body-to-parent.

    Use the constructors (:meth:`identity`, :func:`exp_so3`,
    :meth:`from_quat`) rather than the raw field constructor; they enforce
    unit norm and the canonical sign.
    """

    w: float
    x: float
    y: float
    z: float

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_quat(w: float, x: float, y: float, z: float) -> "Rotation":
        """Build from an arbitrary nonzero quaternion; normalizes, w >= 0."""
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if n == 0.0 or not math.isfinite(n):
            raise ValueError("quaternion norm must be finite and nonzero")
        inv = 1.0 / n
        w, x, y, z = w * inv, x * inv, y * inv, z * inv
        if w < 0.0:
            w, x, y, z = -w, -x, -y, -z
        return Rotation(w, x, y, z)

    def compose(self, o: "Rotation") -> "Rotation":
        """Hamilton product self ⊗ o (apply o first, then self)."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = o.w, o.x, o.y, o.z
        w = w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2
        x = w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2
        y = w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2
        z = w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2
        if w < 0.0:
            w, x, y, z = -w, -x, -y, -z
        return Rotation(w, x, y, z)

    def inverse(self) -> "Rotation":
        return Rotation(self.w, -self.x, -self.y, -self.z)

    def rotate(self, v: Vec3) -> Vec3:
        """Rotate a body-frame vector into the parent frame."""
        qw, qx, qy, qz = self.w, self.x, self.y, self.z
        tx = 2.0 * (qy * v.z - qz * v.y)
        ty = 2.0 * (qz * v.x - qx * v.z)
        tz = 2.0 * (qx * v.y - qy * v.x)
        return Vec3(
            v.x + qw * tx + (qy * tz - qz * ty),
            v.y + qw * ty + (qz * tx - qx * tz),
            v.z + qw * tz + (qx * ty - qy * tx),
        )

    def rotate_inv(self, v: Vec3) -> Vec3:
        """Rotate a parent-frame vector into the body frame."""
        return self.inverse().rotate(v)

    def matrix(self) -> Mat3:
        w, x, y, z = self.w, self.x, self.y, self.z
        return (
            (1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)),
            (2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)),
            (2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)),
        )

    def angle(self) -> float:
        """Rotation angle in [0, pi]."""
        s = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        return 2.0 * math.atan2(s, abs(self.w))

    def normalized(self) -> "Rotation":
        return Rotation.from_quat(self.w, self.x, self.y, self.z)

    def norm(self) -> float:
        return math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)

    def is_finite(self) -> bool:
        return math.isfinite(self.w + self.x + self.y + self.z)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)


@dataclass(frozen=True, slots=True)
class Pose:
    """Position [m] plus orientation of one frame relative to another."""

    position: Vec3
    orientation: Rotation

    @staticmethod
    def identity() -> "Pose":
        return Pose(ZERO3, Rotation.identity())


@dataclass(frozen=True, slots=True)
class Twist:
    """Linear [m/s] and angular [rad/s] velocity with frame of expression."""

    linear: Vec3
    angular: Vec3
    frame: Frame

    @staticmethod
    def zero(frame: Frame) -> "Twist":
        return Twist(ZERO3, ZERO3, frame)


@dataclass(frozen=True, slots=True)
class Wrench:
    """Force [N] and torque [N·m] with frame of expression."""

    force: Vec3
    torque: Vec3
    frame: Frame

    @staticmethod
    def zero(frame: Frame) -> "Wrench":
        return Wrench(ZERO3, ZERO3, frame)

    def __add__(self, o: "Wrench") -> "Wrench":
        if self.frame is not o.frame:
            raise ValueError(f"cannot add wrenches in {self.frame} and {o.frame}")
        return Wrench(self.force + o.force, self.torque + o.torque, self.frame)


def hat(v: Vec3) -> Mat3:
    """Skew-symmetric matrix [v]x with hat(v) @ u = v × u."""
    return (
        (0.0, -v.z, v.y),
        (v.z, 0.0, -v.x),
        (-v.y, v.x, 0.0),
    )


def vee(m: Mat3) -> Vec3:
    """Inverse of hat(); raises NotSkewSymmetric beyond 1e-9 asymmetry."""
    worst = 0.0
    for i in range(3):
        for j in range(3):
            worst = max(worst, abs(m[i][j] + m[j][i]))
    if worst > 1e-9:
        raise NotSkewSymmetric(f"max |M + M^T| entry = {worst:.3e} exceeds 1e-9")
    return Vec3(m[2][1], m[0][2], m[1][0])


def skew_part_vee(r: Rotation) -> Vec3:
    """(1/2) vee(R - R^T); equals sin(theta)·axis for angle theta about axis.

    Materializes the rotation matrix so the value is exactly the
    antisymmetric-part extraction, not a small-angle shortcut.
    """
    m = r.matrix()
    return Vec3(
        0.5 * (m[2][1] - m[1][2]),
        0.5 * (m[0][2] - m[2][0]),
        0.5 * (m[1][0] - m[0][1]),
    )


def exp_so3(axis_angle: Vec3) -> Rotation:
    """Rotation exponential: axis-angle vector [rad] to quaternion."""
    theta = axis_angle.norm()
    half = 0.5 * theta
    # sin(theta/2)/theta -> 1/2 as theta -> 0; branch is exact to O(theta^2)
    k = math.sin(half) / theta if theta > 1e-9 else 0.5
    return Rotation.from_quat(
        math.cos(half), k * axis_angle.x, k * axis_angle.y, k * axis_angle.z
    )


def integrate_rotation(r: Rotation, omega_body: Vec3, dt: float) -> Rotation:
    """One step of R' = R · exp([omega_body·dt]x), renormalized.

    Exact for constant body rate, so the SO(3) manifold is preserved by
    construction at any dt > 0.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    dq = exp_so3(Vec3(omega_body.x * dt, omega_body.y * dt, omega_body.z * dt))
    return r.compose(dq).normalized()
