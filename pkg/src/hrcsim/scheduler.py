"""Dual-stream dispatch and execution of planned trajectories.

Every dispatched action becomes a communicative act carried on two media:
the anticipated stream ("am", the ghost/hologram playback) starts at dispatch
time, and the real motion stream ("m") starts delta_t seconds later with the
identical waypoints. The scheduler owns robot state advancement on a fixed
simulated tick, collision episodes with a recovery pause, and act lifecycle
events. All outputs are deterministic given (inputs, clock).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from hrcsim.geometry import Pose
from hrcsim.kinematics import RobotModel, forward_kinematics
from hrcsim.planner import PlanAction
from hrcsim.trajectory import JointTrajectory
from hrcsim.world import DEFAULT_LINK_RADIUS, World, arm_collision

DEFAULT_DELTA_T = 3.0
DEFAULT_COLLISION_PAUSE = 2.0


class NegativeDelay(ValueError):
    pass


class UnknownAct(KeyError):
    pass


class MediumKind(str, enum.Enum):
    ROBOT_MOTION = "m"
    ANTICIPATED_ROBOT_MOTION = "am"


@dataclass
class ScheduledStream:
    medium: MediumKind
    start_time: float
    trajectory: JointTrajectory


@dataclass
class CommunicativeAct:
    """A dispatched action's media bundle: real + anticipated streams."""

    act_id: int
    info: PlanAction
    streams: dict[MediumKind, ScheduledStream]
    delta_t: float


@dataclass
class RobotState:
    q: np.ndarray
    attached_object: str | None = None
    executing_act: int | None = None
    paused_until: float | None = None


@dataclass
class Event:
    """One simulation event; serialized to the log as {t, type, payload}."""

    t: float
    type: str
    payload: dict

    def to_dict(self) -> dict:
        return {"t": self.t, "type": self.type, "payload": self.payload}


def make_communicative_act(
    info: PlanAction, traj: JointTrajectory, dispatch_time: float, delta_t: float, act_id: int = 0
) -> CommunicativeAct:
    """Bundle a trajectory into the two-stream act: the anticipated stream
    starts at dispatch time, the real stream the configured delay later."""
    if delta_t < 0:
        raise NegativeDelay(f"delta_t must be >= 0, got {delta_t}")
    streams = {
        MediumKind.ANTICIPATED_ROBOT_MOTION: ScheduledStream(
            MediumKind.ANTICIPATED_ROBOT_MOTION, dispatch_time, traj
        ),
        MediumKind.ROBOT_MOTION: ScheduledStream(
            MediumKind.ROBOT_MOTION, dispatch_time + delta_t, traj
        ),
    }
    return CommunicativeAct(act_id=act_id, info=info, streams=streams, delta_t=delta_t)


class Scheduler:
    """Single active act at a time; owned by the simulation loop."""

    def __init__(
        self,
        model: RobotModel,
        delta_t: float = DEFAULT_DELTA_T,
        collision_pause: float = DEFAULT_COLLISION_PAUSE,
        am_enabled: bool = True,
        link_radius: float = DEFAULT_LINK_RADIUS,
        handover_return_pose: Callable[[str], Pose] | None = None,
    ):
        if delta_t < 0:
            raise NegativeDelay(f"delta_t must be >= 0, got {delta_t}")
        self.model = model
        self.delta_t = delta_t
        self.collision_pause = collision_pause
        self.am_enabled = am_enabled
        self.link_radius = link_radius
        self.handover_return_pose = handover_return_pose
        self._next_act_id = 1
        self._act: CommunicativeAct | None = None
        self._progress = 0.0
        self._am_next = 0  # next anticipated waypoint index to emit
        self._m_next = 0
        self._mark_next = 0
        self._in_contact = False

    @property
    def active_act(self) -> CommunicativeAct | None:
        return self._act

    def dispatch(self, info: PlanAction, traj: JointTrajectory, clock: float) -> list[Event]:
        """Emit the act's trajectory frames; anticipated first, then real."""
        if self._act is not None:
            raise RuntimeError("an act is already executing; the plan is strictly sequential")
        act = make_communicative_act(info, traj, clock, self.delta_t, act_id=self._next_act_id)
        self._next_act_id += 1
        self._act = act
        self._progress = 0.0
        self._am_next = 0
        self._m_next = 0
        self._mark_next = 0
        events = []
        base_payload = {
            "act_id": act.act_id,
            "start_time": None,
            "dispatch_time": clock,
            "object_id": info.object_id,
            "skill": info.skill,
            "step_index": info.step_index,
            **traj.to_dict(),
        }
        for medium in (MediumKind.ANTICIPATED_ROBOT_MOTION, MediumKind.ROBOT_MOTION):
            if medium is MediumKind.ANTICIPATED_ROBOT_MOTION and not self.am_enabled:
                continue
            payload = dict(base_payload)
            payload["medium"] = medium.value
            payload["start_time"] = act.streams[medium].start_time
            events.append(Event(clock, "trajectory", payload))
        return events

    def abort(self, state: RobotState, act_id: int, clock: float) -> list[Event]:
        """Cancel both streams; the robot halts at its current configuration."""
        if self._act is None or self._act.act_id != act_id:
            raise UnknownAct(act_id)
        info = self._act.info
        self._act = None
        state.executing_act = None
        state.attached_object = None
        state.paused_until = None
        self._in_contact = False
        return [Event(clock, "act_aborted", {"act_id": act_id, "step_index": info.step_index})]

    def tick(self, state: RobotState, world: World, clock: float, dt: float) -> list[Event]:
        """Advance one tick ending at `clock`; returns events in deterministic
        order: anticipated waypoints, real motion, telemetry, collisions,
        completion."""
        if dt <= 0:
            raise ValueError("dt must be > 0")
        events: list[Event] = []
        act = self._act
        completed = False

        # (1) anticipated-stream playback
        if act is not None and self.am_enabled:
            am = act.streams[MediumKind.ANTICIPATED_ROBOT_MOTION]
            traj = am.trajectory
            while self._am_next < traj.n_points and am.start_time + traj.times[self._am_next] <= clock:
                idx = self._am_next
                events.append(
                    Event(
                        clock,
                        "am_waypoint",
                        {
                            "act_id": act.act_id,
                            "index": idx,
                            "t_rel": float(traj.times[idx]),
                            "q": [float(v) for v in traj.configurations[idx]],
                        },
                    )
                )
                self._am_next += 1

        # (2) real-stream motion
        if act is not None:
            m = act.streams[MediumKind.ROBOT_MOTION]
            traj = m.trajectory
            state.executing_act = act.act_id
            paused = state.paused_until is not None and clock <= state.paused_until
            if not paused and state.paused_until is not None:
                state.paused_until = None
            if clock > m.start_time and not paused:
                self._progress = min(self._progress + dt, traj.duration)
                state.q = traj.interpolate(self._progress)
            if clock >= m.start_time:
                events.extend(self._cross_marks(state, world, act, clock))
                while (
                    self._m_next < traj.n_points and traj.times[self._m_next] <= self._progress
                ):
                    idx = self._m_next
                    events.append(
                        Event(
                            clock,
                            "m_waypoint",
                            {
                                "act_id": act.act_id,
                                "index": idx,
                                "t_rel": float(traj.times[idx]),
                                "q": [float(v) for v in traj.configurations[idx]],
                            },
                        )
                    )
                    self._m_next += 1
                if self._progress >= traj.duration:
                    completed = True
        frames = self.model.frames(state.q)
        if act is not None and state.attached_object is not None:
            self._carry_attached(state, world, frames)

        # (3) telemetry
        events.append(
            Event(
                clock,
                "joint_state",
                {
                    "q": [float(v) for v in state.q],
                    "act_id": act.act_id if act is not None else None,
                },
            )
        )

        # (4) collision episodes: one event per contiguous contact, with pause
        exclude = tuple(
            x
            for x in (
                state.attached_object,
                act.info.object_id if act is not None else None,
            )
            if x is not None
        )
        contacts = arm_collision(
            self.model, state.q, world, self.link_radius, exclude=exclude, frames=frames
        )
        if contacts:
            if not self._in_contact:
                self._in_contact = True
                state.paused_until = clock + self.collision_pause
                events.append(
                    Event(
                        clock,
                        "collision_event",
                        {
                            "act_id": act.act_id if act is not None else None,
                            "contacts": [[link, oid] for link, oid in contacts],
                            "paused_until": state.paused_until,
                        },
                    )
                )
        else:
            self._in_contact = False

        # (5) act completion
        if act is not None and completed:
            events.extend(self._complete(state, world, act, clock))
        return events

    def _cross_marks(self, state, world, act, clock) -> list[Event]:
        events = []
        traj = act.streams[MediumKind.ROBOT_MOTION].trajectory
        marks = traj.phase_marks
        while self._mark_next < len(marks) and marks[self._mark_next][0] <= self._progress:
            _, phase = marks[self._mark_next]
            self._mark_next += 1
            if phase == "grasp":
                state.attached_object = act.info.object_id
            elif phase == "release":
                state.attached_object = None
                if act.info.place_pose is not None:
                    # place_pose targets the end effector; the object lands at
                    # that pose through its grasp offset
                    obj = world.get(act.info.object_id)
                    landed = act.info.place_pose @ obj.grasp_offset.inverse()
                    world.update_object_pose(act.info.object_id, landed, source="plan")
                    events.append(
                        Event(
                            clock,
                            "object_pose_response",
                            {
                                "object_id": act.info.object_id,
                                "pose": landed.to_dict(),
                                "source": "plan",
                            },
                        )
                    )
        return events

    def _carry_attached(self, state: RobotState, world: World, frames) -> None:
        oid = state.attached_object
        obj = world.get(oid)
        ee = Pose.from_matrix(frames[-1])
        world.update_object_pose(oid, ee @ obj.grasp_offset.inverse(), source="plan")

    def _complete(self, state, world, act, clock) -> list[Event]:
        events = []
        if act.info.skill == "handover":
            # the human takes the tool: it returns to the pose the return hook
            # names. Without a hook it simply stays in the gripper.
            if self.handover_return_pose is not None:
                state.attached_object = None
                pose = self.handover_return_pose(act.info.object_id)
                world.update_object_pose(act.info.object_id, pose, source="plan")
                events.append(
                    Event(
                        clock,
                        "object_pose_response",
                        {
                            "object_id": act.info.object_id,
                            "pose": pose.to_dict(),
                            "source": "plan",
                        },
                    )
                )
        events.append(
            Event(clock, "act_completed", {"act_id": act.act_id, "step_index": act.info.step_index})
        )
        self._act = None
        self._progress = 0.0
        state.executing_act = None
        state.paused_until = None
        return events
