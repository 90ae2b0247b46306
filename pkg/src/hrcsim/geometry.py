"""Rigid-body geometry: quaternions, poses, and frame transforms.

Quaternions are stored as (w, x, y, z) and kept unit-norm. A Transform is a
rigid frame transform; a Pose is the same structure read as "frame of a thing
in some reference frame", so the two share one implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

QUAT_NORM_TOL = 1e-9


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(np.dot(q, q)))
    if n == 0.0:
        raise ValueError("zero quaternion")
    return q / n


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by unit quaternion q."""
    w, x, y, z = q
    u = np.array([x, y, z])
    uv = np.cross(u, v)
    return np.asarray(v) + 2.0 * (w * uv + np.cross(u, uv))


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Unit quaternion (w >= 0) from a rotation matrix, Shepperd's method."""
    t = m[0, 0] + m[1, 1] + m[2, 2]
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def quat_angle(q: np.ndarray) -> float:
    """Rotation angle in [0, pi] encoded by unit quaternion q."""
    w = min(1.0, max(-1.0, abs(float(q[0]))))
    return 2.0 * math.acos(w)


def quat_rotvec(q: np.ndarray) -> np.ndarray:
    """Axis-angle (rotation vector) of unit quaternion q."""
    w, x, y, z = q
    if w < 0:
        w, x, y, z = -w, -x, -y, -z
    s = math.sqrt(x * x + y * y + z * z)
    if s < 1e-12:
        return np.array([2.0 * x, 2.0 * y, 2.0 * z])
    angle = 2.0 * math.atan2(s, w)
    return np.array([x, y, z]) * (angle / s)


@dataclass(eq=False)
class Transform:
    """Rigid transform (and pose): translation + unit quaternion."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.orientation = np.asarray(self.orientation, dtype=float).reshape(4)
        n = float(np.linalg.norm(self.orientation))
        if abs(n - 1.0) > QUAT_NORM_TOL:
            raise ValueError(f"orientation quaternion norm {n} not within {QUAT_NORM_TOL} of 1")

    @staticmethod
    def identity() -> "Transform":
        return Transform()

    @staticmethod
    def from_xyz_quat(x, y, z, qw, qx, qy, qz) -> "Transform":
        return Transform(np.array([x, y, z], dtype=float), quat_normalize([qw, qx, qy, qz]))

    def compose(self, other: "Transform") -> "Transform":
        """self ∘ other: apply other first in self's frame."""
        return Transform(
            self.position + quat_rotate(self.orientation, other.position),
            quat_normalize(quat_mul(self.orientation, other.orientation)),
        )

    def __matmul__(self, other: "Transform") -> "Transform":
        return self.compose(other)

    def inverse(self) -> "Transform":
        qi = quat_conj(self.orientation)
        return Transform(-quat_rotate(qi, self.position), qi)

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.position + quat_rotate(self.orientation, np.asarray(point, dtype=float))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.orientation)
        m[:3, 3] = self.position
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Transform":
        return Transform(np.array(m[:3, 3]), quat_from_matrix(np.asarray(m)[:3, :3]))

    def almost_equal(self, other: "Transform", tol: float = 1e-9) -> bool:
        if float(np.max(np.abs(self.position - other.position))) > tol:
            return False
        rel = quat_mul(quat_conj(self.orientation), other.orientation)
        return quat_angle(quat_normalize(rel)) <= tol

    def to_dict(self) -> dict:
        return {
            "position": [float(v) for v in self.position],
            "orientation": [float(v) for v in self.orientation],
        }

    @staticmethod
    def from_dict(d: dict) -> "Transform":
        return Transform(np.array(d["position"], dtype=float), np.array(d["orientation"], dtype=float))

    def __repr__(self):
        p = ", ".join(f"{v:.6g}" for v in self.position)
        o = ", ".join(f"{v:.6g}" for v in self.orientation)
        return f"Transform(p=({p}), q=({o}))"


# A pose is a transform read as "frame of a thing in a reference frame".
Pose = Transform


def pose_error(target: Transform, actual: Transform) -> tuple[float, float]:
    """(position distance in meters, orientation error angle in radians)."""
    dp = float(np.linalg.norm(target.position - actual.position))
    rel = quat_mul(quat_conj(actual.orientation), target.orientation)
    return dp, quat_angle(quat_normalize(rel))
