"""Timed joint trajectories: interpolation, straight joint-space paths, and
trapezoidal-profile time parameterization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hrcsim.kinematics import RobotModel

PHASES = ("approach", "grasp", "transit", "release", "hold")

VELOCITY_EPS = 1e-9


@dataclass
class JointTrajectory:
    """Piecewise-linear joint trajectory with optional skill phase marks.

    times start at 0 and increase strictly; a single-point trajectory has
    duration 0 and represents "already there".
    """

    times: np.ndarray
    configurations: np.ndarray  # (n_points, n_joints)
    phase_marks: list[tuple[float, str]] = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.configurations = np.atleast_2d(np.asarray(self.configurations, dtype=float))
        if len(self.times) != len(self.configurations):
            raise ValueError("times and configurations length mismatch")
        if len(self.times) == 0:
            raise ValueError("empty trajectory")
        if self.times[0] != 0.0:
            raise ValueError("trajectory must start at time 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for _, phase in self.phase_marks:
            if phase not in PHASES:
                raise ValueError(f"unknown phase {phase!r}")

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def n_points(self) -> int:
        return len(self.times)

    def start(self) -> np.ndarray:
        return self.configurations[0]

    def end(self) -> np.ndarray:
        return self.configurations[-1]

    def interpolate(self, t: float) -> np.ndarray:
        """Joint configuration at time t, clamped to the trajectory span."""
        if t <= 0.0:
            return self.configurations[0].copy()
        if t >= self.duration:
            return self.configurations[-1].copy()
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        t0, t1 = self.times[idx], self.times[idx + 1]
        alpha = (t - t0) / (t1 - t0)
        return (1.0 - alpha) * self.configurations[idx] + alpha * self.configurations[idx + 1]

    def phase_at(self, t: float) -> str | None:
        current = None
        for mark_t, phase in self.phase_marks:
            if mark_t <= t:
                current = phase
        return current

    def validate(self, model: RobotModel) -> None:
        """Raise if limits or per-joint velocity bounds are violated."""
        for q in self.configurations:
            q = model.check_q(q)
            if np.any(q < model.lower) or np.any(q > model.upper):
                raise ValueError("trajectory leaves joint limits")
        for i in range(1, self.n_points):
            dt = self.times[i] - self.times[i - 1]
            vel = np.abs(self.configurations[i] - self.configurations[i - 1]) / dt
            if np.any(vel > model.v_max + VELOCITY_EPS):
                raise ValueError(f"velocity bound exceeded on segment {i}")

    def to_dict(self) -> dict:
        return {
            "points": [
                {"t": float(t), "q": [float(v) for v in q]}
                for t, q in zip(self.times, self.configurations)
            ],
            "phase_marks": [{"t": float(t), "phase": p} for t, p in self.phase_marks],
        }

    @staticmethod
    def from_dict(d: dict) -> "JointTrajectory":
        pts = d["points"]
        return JointTrajectory(
            times=np.array([p["t"] for p in pts]),
            configurations=np.array([p["q"] for p in pts]),
            phase_marks=[(m["t"], m["phase"]) for m in d.get("phase_marks", [])],
        )


def straight_joint_path(q_start, q_goal, n_points: int) -> list[np.ndarray]:
    """Linear joint-space interpolation, endpoints included."""
    q_start = np.asarray(q_start, dtype=float)
    q_goal = np.asarray(q_goal, dtype=float)
    if q_start.shape != q_goal.shape:
        raise ValueError("start/goal dimension mismatch")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    alphas = np.linspace(0.0, 1.0, n_points)
    return [(1.0 - a) * q_start + a * q_goal for a in alphas]


def segment_duration(delta_q, v_max, a_max) -> float:
    """Time for the limiting joint under a trapezoidal velocity profile.

    A joint covering distance d reaches cruise speed when d >= v^2/a
    (duration d/v + v/a), otherwise the profile is triangular
    (duration 2*sqrt(d/a)).
    """
    d = np.abs(np.asarray(delta_q, dtype=float))
    v = np.asarray(v_max, dtype=float)
    a = np.asarray(a_max, dtype=float)
    trapezoid = d / v + v / a
    triangle = 2.0 * np.sqrt(d / a)
    per_joint = np.where(d >= v * v / a, trapezoid, triangle)
    per_joint = np.where(d == 0.0, 0.0, per_joint)
    return float(np.max(per_joint))


def time_parameterize(waypoints, model: RobotModel) -> JointTrajectory:
    """Assign cumulative timestamps to waypoints; duplicates are dropped."""
    if len(waypoints) == 0:
        raise ValueError("need at least one waypoint")
    qs = [model.check_q(w) for w in waypoints]
    deduped = [qs[0]]
    for q in qs[1:]:
        if not np.array_equal(q, deduped[-1]):
            deduped.append(q)
    times = [0.0]
    for prev, nxt in zip(deduped, deduped[1:]):
        times.append(times[-1] + segment_duration(nxt - prev, model.v_max, model.a_max))
    return JointTrajectory(times=np.array(times), configurations=np.array(deduped))
