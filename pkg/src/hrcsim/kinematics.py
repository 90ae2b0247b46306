"""Serial-arm model: forward kinematics, Jacobian, damped-least-squares IK.

All angles are radians, all lengths meters. The arm is a chain of revolute
joints under the classic (distal) Denavit-Hartenberg convention:
T_i = RotZ(theta_i + offset) * TransZ(d) * TransX(a) * RotX(alpha),
composed left-to-right onto the model's base frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hrcsim import kernels
from hrcsim.geometry import Pose, Transform, pose_error, quat_from_matrix, quat_rotvec


class DimensionMismatch(ValueError):
    """Joint vector length does not match the model."""


class IkError(RuntimeError):
    pass


class MaxIterationsError(IkError):
    """IK did not converge within the iteration budget."""


class UnreachableError(IkError):
    """Target lies beyond the arm's total reach."""


@dataclass
class JointSpec:
    name: str
    dh: tuple[float, float, float, float]  # (a, alpha, d, theta_offset)
    limits: tuple[float, float]  # (lower, upper), closed interval
    v_max: float
    a_max: float

    def __post_init__(self):
        vals = (*self.dh, *self.limits, self.v_max, self.a_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"joint {self.name}: non-finite parameter")
        if not self.limits[0] < self.limits[1]:
            raise ValueError(f"joint {self.name}: lower limit must be < upper limit")
        if self.v_max <= 0 or self.a_max <= 0:
            raise ValueError(f"joint {self.name}: v_max and a_max must be > 0")


@dataclass
class RobotModel:
    name: str
    joints: list[JointSpec]
    base_frame: Transform = field(default_factory=Transform.identity)

    def __post_init__(self):
        if not self.joints:
            raise ValueError("robot model needs at least one joint")
        self._dh = np.array([j.dh for j in self.joints], dtype=float)
        self._base = self.base_frame.matrix()
        self.lower = np.array([j.limits[0] for j in self.joints])
        self.upper = np.array([j.limits[1] for j in self.joints])
        self.v_max = np.array([j.v_max for j in self.joints])
        self.a_max = np.array([j.a_max for j in self.joints])

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def total_reach(self) -> float:
        """Upper bound on end-effector distance from the base origin."""
        return float(np.sum(np.abs(self._dh[:, 0]) + np.abs(self._dh[:, 2])))

    def check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.n_joints,):
            raise DimensionMismatch(
                f"expected {self.n_joints} joint values, got shape {q.shape}"
            )
        return q

    def frames(self, q) -> np.ndarray:
        """All chain frames as (n+1, 4, 4) homogeneous matrices (frame 0 = base)."""
        return kernels.fk_frames(self._dh, self._base, self.check_q(q))

    def clamp(self, q) -> np.ndarray:
        return np.clip(self.check_q(q), self.lower, self.upper)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base_frame": self.base_frame.to_dict(),
            "joints": [
                {
                    "name": j.name,
                    "dh": {
                        "a": j.dh[0],
                        "alpha": j.dh[1],
                        "d": j.dh[2],
                        "theta_offset": j.dh[3],
                    },
                    "limits": {"lower": j.limits[0], "upper": j.limits[1]},
                    "v_max": j.v_max,
                    "a_max": j.a_max,
                }
                for j in self.joints
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "RobotModel":
        joints = [
            JointSpec(
                name=j["name"],
                dh=(j["dh"]["a"], j["dh"]["alpha"], j["dh"]["d"], j["dh"]["theta_offset"]),
                limits=(j["limits"]["lower"], j["limits"]["upper"]),
                v_max=j["v_max"],
                a_max=j["a_max"],
            )
            for j in d["joints"]
        ]
        base = Transform.from_dict(d["base_frame"]) if "base_frame" in d else Transform.identity()
        return RobotModel(name=d["name"], joints=joints, base_frame=base)


def load_robot_model(path: str | Path) -> RobotModel:
    with open(path, encoding="utf-8") as fh:
        return RobotModel.from_dict(json.load(fh))


@dataclass
class IkOptions:
    max_iters: int = 300
    tolerance: float = 1e-6
    damping: float = 0.05


def forward_kinematics(model: RobotModel, q) -> Pose:
    """End-effector pose in the world frame."""
    frames = model.frames(q)
    ee = frames[-1]
    return Pose(np.array(ee[:3, 3]), quat_from_matrix(ee[:3, :3]))


def jacobian(model: RobotModel, q) -> np.ndarray:
    """Geometric Jacobian at q: rows 0-2 linear, rows 3-5 angular (world frame)."""
    return kernels.jacobian_from_frames(model.frames(q))


def within_limits(model: RobotModel, q) -> bool:
    q = model.check_q(q)
    return bool(np.all(q >= model.lower) and np.all(q <= model.upper))


def _task_error(model: RobotModel, frames: np.ndarray, target: Pose) -> np.ndarray:
    """6-vector task error (position; orientation as world rotation vector)."""
    ee = frames[-1]
    err = np.empty(6)
    err[:3] = target.position - ee[:3, 3]
    q_actual = quat_from_matrix(ee[:3, :3])
    q_rel = _quat_mul_conj(target.orientation, q_actual)
    err[3:] = quat_rotvec(q_rel)
    return err


def _quat_mul_conj(qt, qa):
    # qt * conj(qa), i.e. rotation taking actual to target, in the world frame
    from hrcsim.geometry import quat_conj, quat_mul, quat_normalize

    return quat_normalize(quat_mul(qt, quat_conj(qa)))


def inverse_kinematics(
    model: RobotModel, target: Pose, seed, opts: IkOptions | None = None
) -> np.ndarray:
    """Damped-least-squares IK with per-iteration joint-limit clamping.

    Returns a configuration whose pose error (position in meters, orientation
    angle in radians) is below opts.tolerance. Raises UnreachableError when
    the target position exceeds the arm's total reach, MaxIterationsError when
    the iteration budget runs out.
    """
    opts = opts or IkOptions()
    q = model.check_q(seed).copy()
    dist = float(np.linalg.norm(np.asarray(target.position) - model.base_frame.position))
    if dist > model.total_reach:
        raise UnreachableError(
            f"target at {dist:.3f} m exceeds total reach {model.total_reach:.3f} m"
        )
    eye6 = np.eye(6)
    for _ in range(opts.max_iters):
        frames = model.frames(q)
        err = _task_error(model, frames, target)
        if np.linalg.norm(err[:3]) < opts.tolerance and np.linalg.norm(err[3:]) < opts.tolerance:
            return q
        jac = kernels.jacobian_from_frames(frames)
        # damping scaled down with the error so the tail converges even near
        # singular configurations; opts.damping acts at error norms >= 1
        lam = opts.damping * min(1.0, float(np.linalg.norm(err)))
        delta = jac.T @ np.linalg.solve(jac @ jac.T + (lam * lam + 1e-12) * eye6, err)
        step = float(np.linalg.norm(delta))
        if step > 0.5:
            delta *= 0.5 / step
        q = model.clamp(q + delta)
    frames = model.frames(q)
    err = _task_error(model, frames, target)
    raise MaxIterationsError(
        f"no convergence after {opts.max_iters} iterations "
        f"(pos err {np.linalg.norm(err[:3]):.2e}, rot err {np.linalg.norm(err[3:]):.2e})"
    )


def pose_residual(model: RobotModel, q, target: Pose) -> tuple[float, float]:
    """(position, orientation) error of FK(q) against target."""
    return pose_error(target, forward_kinematics(model, q))
