"""Scripted sequential plans: parsing, input gating, and step bookkeeping.

Plan files are line-oriented UTF-8 text; one action per line:

    <skill> <object_id> [place: x y z qw qx qy qz] | "<instruction>"

Blank lines and lines starting with '#' are ignored. Steps run strictly in
file order, each gated on a boolean human input (the joystick press).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from hrcsim.geometry import Pose
from hrcsim.planner import SKILLS, PlanAction


class PlanParseError(ValueError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if line_no is not None else message)


class UnknownSkill(PlanParseError):
    pass


class MissingPlacePose(PlanParseError):
    pass


class MalformedLine(PlanParseError):
    pass


class EmptyPlan(PlanParseError):
    pass


class PhaseViolation(RuntimeError):
    pass


PHASE_AWAITING = "awaiting_input"
PHASE_PLANNING = "planning"
PHASE_EXECUTING = "executing"
PHASE_DONE = "done"


@dataclass
class Plan:
    title: str
    actions: list[PlanAction]

    def __post_init__(self):
        if not self.actions:
            raise EmptyPlan("plan has no actions")
        for i, action in enumerate(self.actions, start=1):
            if action.step_index != i:
                raise ValueError(f"step_index values must be contiguous 1..N, got {action.step_index} at {i}")

    def __len__(self) -> int:
        return len(self.actions)


def parse_plan(text: str, title: str = "plan") -> Plan:
    actions = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "|" in line:
            head, _, tail = line.partition("|")
            instruction = tail.strip()
            if len(instruction) >= 2 and instruction[0] == '"' and instruction[-1] == '"':
                instruction = instruction[1:-1]
        else:
            head, instruction = line, ""
        tokens = head.split()
        if len(tokens) < 2:
            raise MalformedLine("expected '<skill> <object_id> ...'", line_no)
        skill, object_id = tokens[0], tokens[1]
        if skill not in SKILLS:
            raise UnknownSkill(f"unknown skill {skill!r}", line_no)
        place_pose = None
        rest = tokens[2:]
        if rest:
            if rest[0] != "place:":
                raise MalformedLine(f"unexpected token {rest[0]!r}", line_no)
            if skill == "handover":
                raise MalformedLine("handover does not take a place pose", line_no)
            if len(rest) != 8:
                raise MalformedLine("place: needs 7 numbers (x y z qw qx qy qz)", line_no)
            try:
                vals = [float(v) for v in rest[1:]]
            except ValueError:
                raise MalformedLine("place: values must be numbers", line_no) from None
            place_pose = Pose.from_xyz_quat(*vals)
        if skill == "pick_place" and place_pose is None:
            raise MissingPlacePose("pick_place requires 'place: x y z qw qx qy qz'", line_no)
        actions.append(
            PlanAction(
                step_index=len(actions) + 1,
                skill=skill,
                object_id=object_id,
                place_pose=place_pose,
                instruction=instruction,
            )
        )
    if not actions:
        raise EmptyPlan("plan file has no actions")
    return Plan(title=title, actions=actions)


def load_plan(path: str | Path) -> Plan:
    p = Path(path)
    return parse_plan(p.read_text(encoding="utf-8"), title=p.stem)


@dataclass
class PlanState:
    plan: Plan
    cursor: int = 1  # next step, 1-based
    phase: str = PHASE_AWAITING
    step_started_at: dict[int, float] = field(default_factory=dict)
    step_ended_at: dict[int, float] = field(default_factory=dict)

    @property
    def done(self) -> bool:
        return self.phase == PHASE_DONE

    def current_action(self) -> PlanAction | None:
        if self.cursor > len(self.plan):
            return None
        return self.plan.actions[self.cursor - 1]

    def step_durations(self) -> list[float]:
        return [
            self.step_ended_at[k] - self.step_started_at[k]
            for k in sorted(self.step_ended_at)
            if k in self.step_started_at
        ]


def advance(state: PlanState, pressed: bool, clock: float = 0.0) -> PlanAction | None:
    """Dispatch the next action on a press while awaiting input.

    Inputs in any other phase (or non-presses) are ignored and yield None;
    the caller logs them.
    """
    if not pressed or state.phase != PHASE_AWAITING:
        return None
    action = state.current_action()
    if action is None:
        return None
    state.phase = PHASE_PLANNING
    state.step_started_at[state.cursor] = clock
    return action


def mark_executing(state: PlanState) -> None:
    if state.phase != PHASE_PLANNING:
        raise PhaseViolation(f"cannot execute from phase {state.phase}")
    state.phase = PHASE_EXECUTING


def on_act_completed(state: PlanState, act_id: int, clock: float) -> None:
    """Record step end and move the cursor; raises PhaseViolation if no step
    is executing."""
    if state.phase != PHASE_EXECUTING:
        raise PhaseViolation(f"act {act_id} completed while phase={state.phase}")
    state.step_ended_at[state.cursor] = clock
    state.cursor += 1
    state.phase = PHASE_DONE if state.cursor > len(state.plan) else PHASE_AWAITING
