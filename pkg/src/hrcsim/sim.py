"""Deterministic fixed-tick simulation loop.

Owns the clock, robot state, world, plan progress, and the scripted human.
All randomness flows from one run seed through named child generators, so a
run is a pure function of (configuration, seed): event logs are byte-stable.

The scripted human gates plan steps (pressing after a per-step assembly
delay), may proactively nudge the next object while the ghost preview plays
(an intervention), and - when inattentive - blocks the arm's path with a
"hand" obstacle, causing a collision episode and a recovery pause.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from hrcsim.geometry import Pose
from hrcsim.kinematics import RobotModel, forward_kinematics
from hrcsim.net import Hub
from hrcsim.plan import (
    PHASE_AWAITING,
    Plan,
    PlanState,
    advance,
    mark_executing,
    on_act_completed,
)
from hrcsim.planner import (
    IkFailure,
    NoCollisionFreePath,
    PlannerOptions,
    UnknownObject,
    plan_action,
)
from hrcsim.protocol import CATALOG
from hrcsim.scheduler import Event, RobotState, Scheduler
from hrcsim.stats import Trial, TrialRecord
from hrcsim.world import Sphere, World, WorldObject

PlanningError = (IkFailure, NoCollisionFreePath, UnknownObject)

HAND_ID = "human_hand"
HAND_PARK = (0.9, 0.0, 0.05)  # beyond arm reach
HAND_RADIUS = 0.08
BLOCK_WINDOW = (0.3, 0.7)
BLOCK_WITHDRAW = 0.5
MAX_SIM_TIME = 3600.0


@dataclass
class HumanModel:
    """Scripted teammate: assembly delays, attention, and proactivity."""

    delay_kind: str = "fixed"  # fixed | uniform
    delay_s: float = 2.0
    delay_lo: float = 1.0
    delay_hi: float = 3.0
    block_prob: float = 0.0
    intervene_prob: float = 0.0

    def __post_init__(self):
        if self.delay_kind not in ("fixed", "uniform"):
            raise ValueError(f"delay_kind must be fixed or uniform, got {self.delay_kind!r}")

    @staticmethod
    def parse(spec: str) -> "HumanModel":
        """'fixed:2.0' or 'uniform:1.0,3.0'."""
        kind, _, rest = spec.partition(":")
        if kind == "fixed":
            return HumanModel(delay_kind="fixed", delay_s=float(rest or 2.0))
        if kind == "uniform":
            lo, hi = (float(v) for v in rest.split(","))
            return HumanModel(delay_kind="uniform", delay_lo=lo, delay_hi=hi)
        raise ValueError(f"unknown human model {spec!r}")

    def draw_delay(self, rng: np.random.Generator) -> float:
        u = rng.uniform(self.delay_lo, self.delay_hi)  # drawn either way: keeps streams aligned
        return self.delay_s if self.delay_kind == "fixed" else u


class Simulation:
    """One run of one plan under one condition."""

    def __init__(
        self,
        model: RobotModel,
        world: World,
        plan: Plan,
        home_q,
        condition: str = "C1",
        delta_t: float = 3.0,
        tick: float = 0.02,
        seed: int = 0,
        collision_pause: float = 2.0,
        human: HumanModel | None = None,
        planner_opts: PlannerOptions | None = None,
        hub: Hub | None = None,
        event_sink: Callable[[Event], None] | None = None,
        scripted_human: bool = True,
    ):
        if condition not in ("C1", "C2"):
            raise ValueError(f"condition must be C1 or C2, got {condition!r}")
        if tick <= 0:
            raise ValueError("tick must be > 0")
        self.model = model
        self.world = world
        self.plan = plan
        self.condition = condition
        self.delta_t = delta_t
        self.dt = tick
        self.seed = seed
        self.human = human or HumanModel()
        self.planner_opts = planner_opts or PlannerOptions()
        self.hub = hub
        self.event_sink = event_sink

        seeds = np.random.SeedSequence(seed).spawn(2)
        self.planner_rng = np.random.default_rng(seeds[0])
        self.human_rng = np.random.default_rng(seeds[1])

        if HAND_ID not in world:
            world.register_object(
                WorldObject(
                    id=HAND_ID,
                    pose=Pose(np.array(HAND_PARK), np.array([1.0, 0, 0, 0])),
                    shape=Sphere(HAND_RADIUS),
                    kind="fixture",
                )
            )
        self._original_poses = {obj.id: obj.pose for obj in world.objects()}

        self.state = RobotState(q=model.check_q(home_q).copy())
        self.plan_state = PlanState(plan)
        self.scheduler = Scheduler(
            model,
            delta_t=delta_t,
            collision_pause=collision_pause,
            am_enabled=(condition == "C1"),
            link_radius=self.planner_opts.link_radius,
            handover_return_pose=lambda oid: self._original_poses[oid],
        )
        self.trial = Trial(condition, seed)
        self.clock = 0.0
        self.scripted_human = scripted_human
        self._tick_index = 0
        self._schedule: list = []  # (time, seq, kind, data)
        self._schedule_seq = 0
        self._end_time: float | None = None
        self._pending: list[Event] = []
        world.intervention_sink = self._on_intervention

        if scripted_human:
            # the scripted human is ready immediately: first press on tick 1
            self._push(self.dt, "press", None)

    # -- scheduling ------------------------------------------------------

    def _push(self, t: float, kind: str, data) -> None:
        self._schedule_seq += 1
        heapq.heappush(self._schedule, (t, self._schedule_seq, kind, data))

    def _emit(self, event: Event) -> None:
        self._pending.append(event)

    def _flush(self) -> list[Event]:
        out = self._pending
        self._pending = []
        for event in out:
            self._route(event)
        return out

    def flush_external_events(self) -> None:
        """Route events produced by between-tick input handling (serve mode)."""
        self._flush()

    def _on_intervention(self, object_id: str, pose: Pose) -> None:
        self._emit(
            Event(self.clock, "intervention", {"object_id": object_id, "new_pose": pose.to_dict()})
        )

    # -- per-tick processing ---------------------------------------------

    def step(self) -> list[Event]:
        """Advance one tick; returns the tick's events in emission order."""
        self._tick_index += 1
        self.clock = self._tick_index * self.dt

        while self._schedule and self._schedule[0][0] <= self.clock:
            _, _, kind, data = heapq.heappop(self._schedule)
            if kind == "press":
                self.handle_user_input(True)
            elif kind == "hand_place":
                self.world.update_object_pose(HAND_ID, data, source="plan")
            elif kind == "hand_remove":
                park = Pose(np.array(HAND_PARK), np.array([1.0, 0, 0, 0]))
                self.world.update_object_pose(HAND_ID, park, source="plan")
            elif kind == "intervene":
                object_id, nudge = data
                if self.state.attached_object != object_id:
                    pose = self.world.object_pose(object_id)
                    moved = Pose(pose.position + nudge, pose.orientation)
                    self.world.update_object_pose(object_id, moved, source="intervention")

        for event in self.scheduler.tick(self.state, self.world, self.clock, self.dt):
            self._emit(event)
            if event.type == "act_completed":
                self._on_act_completed(event)

        return self._flush()

    def handle_user_input(self, pressed: bool) -> None:
        action = advance(self.plan_state, pressed, self.clock)
        self._emit(
            Event(self.clock, "user_input", {"pressed": pressed, "accepted": action is not None})
        )
        if action is None:
            return
        self._emit_plan_status()
        try:
            traj = plan_action(
                action, self.world, self.state.q, self.model, self.planner_opts, self.planner_rng
            )
        except PlanningError:
            if self.scripted_human:
                raise
            # a live operator may have wedged the scene; report and let them
            # fix it and press again
            self.plan_state.phase = PHASE_AWAITING
            self.plan_state.step_started_at.pop(self.plan_state.cursor, None)
            self._emit(
                Event(
                    self.clock,
                    "error",
                    {"message": f"planning failed for step {action.step_index}"},
                )
            )
            self._emit_plan_status()
            return
        for event in self.scheduler.dispatch(action, traj, self.clock):
            self._emit(event)
        mark_executing(self.plan_state)
        self._emit_plan_status()
        if self.scripted_human:
            self._human_reacts_to_dispatch(action, traj)

    def _human_reacts_to_dispatch(self, action, traj) -> None:
        # all draws happen unconditionally so that runs differing only in the
        # probability knobs consume identical random streams
        u_block = self.human_rng.random()
        frac = self.human_rng.uniform(*BLOCK_WINDOW)
        u_intervene = self.human_rng.random()
        t_frac = self.human_rng.uniform(0.1, 0.9)
        nudge = np.array([*self.human_rng.uniform(-0.02, 0.02, 2), 0.0])
        m_start = self.clock + self.delta_t
        if u_block < self.human.block_prob and traj.duration > 0:
            t_rel = frac * traj.duration
            spot = forward_kinematics(self.model, traj.interpolate(t_rel)).position
            hand_pose = Pose(spot, np.array([1.0, 0, 0, 0]))
            self._push(m_start + t_rel, "hand_place", hand_pose)
            self._push(m_start + t_rel + BLOCK_WITHDRAW, "hand_remove", None)
        if u_intervene < self.human.intervene_prob and self.delta_t > 0:
            self._push(self.clock + t_frac * self.delta_t, "intervene", (action.object_id, nudge))

    def _on_act_completed(self, event: Event) -> None:
        on_act_completed(self.plan_state, event.payload["act_id"], self.clock)
        self._emit_plan_status()
        delay = self.human.draw_delay(self.human_rng)
        if self.plan_state.done:
            self._end_time = self.clock + delay
        elif self.scripted_human:
            self._push(self.clock + delay, "press", None)

    def _emit_plan_status(self) -> None:
        state = self.plan_state
        action = state.current_action()
        self._emit(
            Event(
                self.clock,
                "plan_status",
                {
                    "cursor": state.cursor,
                    "phase": state.phase,
                    "instruction": action.instruction if action else "",
                    "total_steps": len(self.plan),
                },
            )
        )

    def _route(self, event: Event) -> None:
        self.trial.record(event)
        if self.event_sink is not None:
            self.event_sink(event)
        if self.hub is not None and event.type in CATALOG:
            self.hub.broadcast(self.hub.make_envelope(event.type, event.t, event.payload))

    # -- full run ---------------------------------------------------------

    @property
    def finished(self) -> bool:
        return (
            self.plan_state.done
            and self.scheduler.active_act is None
            and self._end_time is not None
            and self.clock >= self._end_time
        )

    def run_to_completion(self, max_sim_time: float = MAX_SIM_TIME) -> TrialRecord:
        while not self.finished:
            if self.clock > max_sim_time:
                raise RuntimeError(f"simulation exceeded {max_sim_time} sim seconds")
            self.step()
        return self.trial.finalize(self.plan_state.step_durations(), self.clock)


class EventLogWriter:
    """Streaming ndjson sink for simulation events."""

    def __init__(self, path: str | Path):
        self._fh = open(path, "w", encoding="utf-8")

    def __call__(self, event: Event) -> None:
        self._fh.write(json.dumps(event.to_dict(), allow_nan=False, separators=(",", ":")) + "\n")

    def close(self) -> None:
        self._fh.close()
