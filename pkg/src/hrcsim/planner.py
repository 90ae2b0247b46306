"""Skill-level motion planning: turns a plan action (pick_place or handover)
into a collision-checked, time-parameterized joint trajectory.

Strategy: Cartesian keyframes (pre-grasp hover above the grasp pose, grasp,
retreat, goal) solved by damped-least-squares IK and joined with straight
joint-space paths. On collision the planner retries with randomized
intermediate via-configurations from a seeded RNG, so replans are
deterministic per run seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hrcsim.geometry import Pose
from hrcsim.kinematics import (
    IkError,
    IkOptions,
    RobotModel,
    UnreachableError,
    forward_kinematics,
    inverse_kinematics,
)
from hrcsim.trajectory import JointTrajectory, straight_joint_path, time_parameterize
from hrcsim.world import DEFAULT_LINK_RADIUS, UnknownId, World, arm_collision

SKILLS = ("pick_place", "handover")


class UnknownObject(KeyError):
    pass


class IkFailure(RuntimeError):
    """A keyframe pose could not be solved."""


class NoCollisionFreePath(RuntimeError):
    """Retry budget exhausted without a collision-free trajectory."""


@dataclass
class PlanAction:
    """One scripted step: what to fetch, how to deliver it, what to tell the human."""

    step_index: int
    skill: str
    object_id: str
    place_pose: Pose | None = None
    instruction: str = ""

    def __post_init__(self):
        if self.step_index < 1:
            raise ValueError("step_index must be >= 1")
        if self.skill not in SKILLS:
            raise ValueError(f"unknown skill {self.skill!r}")
        if self.skill == "pick_place" and self.place_pose is None:
            raise ValueError("pick_place requires a place_pose")
        if self.skill == "handover" and self.place_pose is not None:
            raise ValueError("handover must not carry a place_pose")

    def to_dict(self) -> dict:
        d = {
            "step_index": self.step_index,
            "skill": self.skill,
            "object_id": self.object_id,
            "instruction": self.instruction,
        }
        if self.place_pose is not None:
            d["place_pose"] = self.place_pose.to_dict()
        return d

    @staticmethod
    def from_dict(d: dict) -> "PlanAction":
        return PlanAction(
            step_index=d["step_index"],
            skill=d["skill"],
            object_id=d["object_id"],
            place_pose=Pose.from_dict(d["place_pose"]) if "place_pose" in d else None,
            instruction=d.get("instruction", ""),
        )


@dataclass
class PlannerOptions:
    pre_grasp_height: float = 0.10
    handover_pose: Pose = field(
        default_factory=lambda: Pose.from_xyz_quat(0.05, 0.0, 0.20, 0.0, 1.0, 0.0, 0.0)
    )
    ik: IkOptions = field(default_factory=IkOptions)
    ik_restarts: int = 8
    collision_resolution: float = 0.05
    max_retries: int = 5
    path_step: float = 0.2  # max joint-space distance between interpolated waypoints
    link_radius: float = DEFAULT_LINK_RADIUS
    pose_match_tol: float = 1e-6  # matches IK tolerance: poses closer than this coincide


def solve_keyframe(
    model: RobotModel,
    pose: Pose,
    seed: np.ndarray,
    opts: PlannerOptions,
    rng: np.random.Generator,
) -> np.ndarray:
    """IK with deterministic random restarts around the seed posture."""
    mid = 0.5 * (model.lower + model.upper)
    last = None
    for attempt in range(opts.ik_restarts + 1):
        if attempt == 0:
            trial = seed
        elif attempt == 1:
            trial = mid
        else:
            trial = model.clamp(seed + rng.uniform(-1.2, 1.2, model.n_joints))
        try:
            return inverse_kinematics(model, pose, trial, opts.ik)
        except UnreachableError:
            raise
        except IkError as exc:
            last = exc
    assert last is not None
    raise last


def first_collision_time(
    traj: JointTrajectory,
    world: World,
    model: RobotModel,
    resolution: float,
    exclude: tuple[str, ...] = (),
    link_radius: float = DEFAULT_LINK_RADIUS,
) -> float | None:
    """Earliest sampled time with an arm-world contact, or None if clear."""
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    t = 0.0
    while True:
        q = traj.interpolate(t)
        if arm_collision(model, q, world, link_radius=link_radius, exclude=exclude):
            return t
        if t >= traj.duration:
            return None
        t = min(t + resolution, traj.duration)


def collision_free(
    traj: JointTrajectory,
    world: World,
    model: RobotModel,
    resolution: float,
    exclude: tuple[str, ...] = (),
    link_radius: float = DEFAULT_LINK_RADIUS,
) -> bool:
    """True iff no sampled configuration along traj touches the world.

    Objects named in `exclude` (the action's target / a grasped object) are
    ignored; sampling is every `resolution` seconds plus the final instant.
    """
    return first_collision_time(traj, world, model, resolution, exclude, link_radius) is None


def _assemble(anchors: list[np.ndarray], path_step: float, model: RobotModel) -> tuple[JointTrajectory, list[float]]:
    """Join anchors with straight joint paths leg by leg, time-parameterize
    each leg, and concatenate. Returns (trajectory, time at each anchor)."""
    times = [0.0]
    configs = [anchors[0]]
    anchor_times = [0.0]
    for prev, nxt in zip(anchors, anchors[1:]):
        span = float(np.max(np.abs(nxt - prev)))
        n = max(2, int(math.ceil(span / path_step)) + 1)
        leg = time_parameterize(straight_joint_path(prev, nxt, n), model)
        offset = times[-1]
        for t, q in zip(leg.times[1:], leg.configurations[1:]):
            times.append(offset + float(t))
            configs.append(q)
        anchor_times.append(times[-1])
    return JointTrajectory(times=np.array(times), configurations=np.array(configs)), anchor_times


def plan_action(
    action: PlanAction,
    world: World,
    current_q,
    model: RobotModel,
    opts: PlannerOptions | None = None,
    rng: np.random.Generator | None = None,
) -> JointTrajectory:
    """Plan a full skill trajectory starting exactly at current_q.

    pick_place: approach the object's grasp pose (via a hover point
    pre_grasp_height above it), retreat, and move to the place pose.
    handover: same approach, then move to the configured handover pose and
    hold. Keyframes whose pose coincides with the previous one collapse, so
    planning a no-op motion yields a single-point trajectory of duration 0.
    """
    opts = opts or PlannerOptions()
    rng = rng or np.random.default_rng(0)
    current_q = model.check_q(current_q)
    try:
        target_obj = world.get(action.object_id)
    except UnknownId:
        raise UnknownObject(action.object_id) from None

    grasp = target_obj.grasp_pose()
    hover = Pose(grasp.position + np.array([0.0, 0.0, opts.pre_grasp_height]), grasp.orientation)
    goal = action.place_pose if action.skill == "pick_place" else opts.handover_pose
    final_phase = "release" if action.skill == "pick_place" else "hold"

    start_pose = forward_kinematics(model, current_q)
    at_grasp = grasp.almost_equal(start_pose, tol=opts.pose_match_tol)
    keyframes: list[tuple[Pose, str | None]] = []
    if not at_grasp:
        keyframes += [(hover, None), (grasp, "grasp")]
    if not (at_grasp and goal.almost_equal(grasp, tol=opts.pose_match_tol)):
        keyframes += [(hover, "transit")]
        if action.skill == "pick_place":
            # vertical descent to the place pose and a retreat after release,
            # so transits stay high and the next act never starts in contact
            goal_hover = Pose(
                goal.position + np.array([0.0, 0.0, opts.pre_grasp_height]), goal.orientation
            )
            keyframes += [(goal_hover, None), (goal, final_phase), (goal_hover, None)]
        else:
            keyframes += [(goal, final_phase)]

    anchors = [current_q]
    anchor_marks: list[list[str]] = [(["grasp"] if at_grasp else [])]
    prev_pose = start_pose
    for pose, mark in keyframes:
        if pose.almost_equal(prev_pose, tol=opts.pose_match_tol):
            if mark is not None:
                anchor_marks[-1].append(mark)
            continue
        try:
            q_sol = solve_keyframe(model, pose, anchors[-1], opts, rng)
        except IkError as exc:
            raise IkFailure(
                f"step {action.step_index} ({action.skill} {action.object_id}): {exc}"
            ) from exc
        anchors.append(q_sol)
        anchor_marks.append([mark] if mark is not None else [])
        prev_pose = pose

    exclude = (action.object_id,)
    for attempt in range(opts.max_retries + 1):
        traj, anchor_times = _assemble(anchors, opts.path_step, model)
        marks = [(0.0, "approach")]
        for t, mark_list in zip(anchor_times, anchor_marks):
            for mark in mark_list:
                marks.append((float(t), mark))
        if not any(m[1] == final_phase for m in marks):
            marks.append((traj.duration, final_phase))
        traj.phase_marks = sorted(marks, key=lambda m: m[0])
        hit = first_collision_time(
            traj, world, model, opts.collision_resolution, exclude, opts.link_radius
        )
        if hit is None:
            traj.validate(model)
            return traj
        # retry: drop a randomized via-configuration into the colliding leg,
        # preferring a lifted Cartesian point over the collision spot
        insert_at = 1
        for k, at in enumerate(anchor_times):
            if at <= hit:
                insert_at = k + 1
        insert_at = min(insert_at, len(anchors))
        q_hit = traj.interpolate(hit)
        via = _via_configuration(
            model, anchors[insert_at - 1], anchors[min(insert_at, len(anchors) - 1)],
            q_hit, attempt, opts, rng,
        )
        anchors = anchors[:insert_at] + [via] + anchors[insert_at:]
        anchor_marks = anchor_marks[:insert_at] + [[]] + anchor_marks[insert_at:]
    raise NoCollisionFreePath(
        f"step {action.step_index}: no collision-free path after {opts.max_retries} retries"
    )


def _via_configuration(model, q_before, q_after, q_hit, attempt, opts, rng) -> np.ndarray:
    pose_hit = forward_kinematics(model, q_hit)
    p_a = forward_kinematics(model, q_before).position
    p_b = forward_kinematics(model, q_after).position
    jitter = rng.uniform(-0.06, 0.06, 3)
    lift = 0.15 + 0.08 * attempt + abs(jitter[2])
    target = Pose(
        0.5 * (p_a + p_b) + np.array([jitter[0], jitter[1], lift]), pose_hit.orientation
    )
    try:
        return solve_keyframe(model, target, q_hit, opts, rng)
    except IkError:
        return model.clamp(q_hit + rng.uniform(-0.6, 0.6, model.n_joints))
