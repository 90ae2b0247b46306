"""Run lifecycle: configuration, headless and serve modes, validation,
reporting, and replay.

Exit codes: 0 ok, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import json
import os
import queue
import time
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from hrcsim.geometry import Pose, Transform
from hrcsim.kinematics import IkError, RobotModel, UnreachableError, forward_kinematics
from hrcsim.net import Hub, InboundMessage, SocketServer
from hrcsim.plan import Plan, PlanParseError, load_plan
from hrcsim.planner import PlannerOptions, solve_keyframe
from hrcsim.protocol import Envelope
from hrcsim.scheduler import Event
from hrcsim.sim import EventLogWriter, HumanModel, Simulation
from hrcsim.stats import load_trials, report, write_report
from hrcsim.world import World, load_world

ENV_PREFIX = "HRC_"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class ConfigError(ValueError):
    pass


class BindError(OSError):
    pass


def asset_path(name: str) -> Path:
    return Path(resources.files("hrcsim").joinpath("data", name))


@dataclass
class RunConfig:
    robot_model_path: str = str(asset_path("robot_7dof.json"))
    world_path: str = str(asset_path("assembly_scene.json"))
    plan_path: str = str(asset_path("chair_assembly.plan"))
    delta_t: float = 3.0
    condition: str = "C1"  # C2 suppresses the anticipated stream, delay kept
    tick: float = 0.02
    seed: int = 0
    mode: str = "headless"  # headless | serve
    tcp_port: int = 8571
    console_port: int = 8572
    collision_pause: float = 2.0
    human_model: str = "fixed:2.0"
    block_prob: float = 0.0
    intervene_prob: float = 0.0
    out_dir: str = "out"

    def __post_init__(self):
        for f in fields(self):
            env = os.environ.get(ENV_PREFIX + f.name.upper())
            if env is not None:
                current = getattr(self, f.name)
                if isinstance(current, bool):
                    setattr(self, f.name, env not in ("0", "false", ""))
                elif isinstance(current, int):
                    setattr(self, f.name, int(env))
                elif isinstance(current, float):
                    setattr(self, f.name, float(env))
                else:
                    setattr(self, f.name, env)

    def check(self) -> None:
        if self.delta_t < 0:
            raise ConfigError("delta_t must be >= 0")
        if self.tick <= 0:
            raise ConfigError("tick must be > 0")
        if self.condition not in ("C1", "C2"):
            raise ConfigError(f"condition must be C1 or C2, got {self.condition!r}")
        if self.mode not in ("headless", "serve"):
            raise ConfigError(f"mode must be headless or serve, got {self.mode!r}")
        for path in (self.robot_model_path, self.world_path, self.plan_path):
            if not Path(path).exists():
                raise ConfigError(f"file not found: {path}")

    def human(self) -> HumanModel:
        hm = HumanModel.parse(self.human_model)
        hm.block_prob = self.block_prob
        hm.intervene_prob = self.intervene_prob
        return hm


def load_robot(path: str | Path) -> tuple[RobotModel, np.ndarray]:
    """(model, home configuration); home defaults to mid-range."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    model = RobotModel.from_dict(doc)
    if "home" in doc:
        home = model.check_q(np.array(doc["home"], dtype=float))
    else:
        home = 0.5 * (model.lower + model.upper)
    return model, home


def load_scenario(config: RunConfig) -> tuple[RobotModel, np.ndarray, World, Plan]:
    try:
        model, home = load_robot(config.robot_model_path)
        world = load_world(config.world_path)
        plan = load_plan(config.plan_path)
    except (OSError, ValueError, KeyError, PlanParseError) as exc:
        raise ConfigError(str(exc)) from exc
    return model, home, world, plan


def build_simulation(config: RunConfig, hub: Hub | None = None, event_sink=None,
                     scripted_human: bool = True) -> Simulation:
    model, home, world, plan = load_scenario(config)
    return Simulation(
        model,
        world,
        plan,
        home_q=home,
        condition=config.condition,
        delta_t=config.delta_t,
        tick=config.tick,
        seed=config.seed,
        collision_pause=config.collision_pause,
        human=config.human(),
        planner_opts=PlannerOptions(),
        hub=hub,
        event_sink=event_sink,
        scripted_human=scripted_human,
    )


def run(config: RunConfig) -> int:
    """Execute one trial; writes events.ndjson and trial.json to out_dir."""
    config.check()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log = EventLogWriter(out / "events.ndjson")
    try:
        if config.mode == "headless":
            sim = build_simulation(config, event_sink=log)
            record = sim.run_to_completion()
        else:
            record = _serve(config, log)
        with open(out / "trial.json", "w", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_dict(), separators=(",", ":")) + "\n")
    finally:
        log.close()
    return EXIT_OK


def _serve(config: RunConfig, log: EventLogWriter, port_holder: dict | None = None):
    hub = Hub()
    inbound: "queue.Queue[InboundMessage]" = queue.Queue()
    try:
        tcp = SocketServer("0.0.0.0", config.tcp_port, hub, inbound, websocket=False)
        ws = SocketServer("0.0.0.0", config.console_port, hub, inbound, websocket=True)
    except OSError as exc:
        raise BindError(str(exc)) from exc
    if port_holder is not None:
        port_holder["tcp_port"] = tcp.port
        port_holder["console_port"] = ws.port
    sim = build_simulation(config, hub=hub, event_sink=log, scripted_human=False)
    hub.on_drop = lambda sub: log(Event(sim.clock, "disconnect", {"subscriber": sub.name}))
    tcp.start()
    ws.start()
    handler = ServerHandler(sim, hub, config)
    start_wall = time.monotonic()
    try:
        while not sim.finished:
            while True:
                try:
                    msg = inbound.get_nowait()
                except queue.Empty:
                    break
                handler.handle(msg)
            sim.step()
            target = start_wall + sim.clock
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
    except KeyboardInterrupt:
        pass
    finally:
        tcp.close()
        ws.close()
    return sim.trial.finalize(sim.plan_state.step_durations(), sim.clock)


class ServerHandler:
    """Applies inbound console messages to the simulation at tick boundaries."""

    def __init__(self, sim: Simulation, hub: Hub, config: RunConfig):
        self.sim = sim
        self.hub = hub
        self.config = config

    def _reply(self, msg: InboundMessage, mtype: str, payload: dict) -> None:
        env = self.hub.make_envelope(mtype, self.sim.clock, payload, msg.envelope.correlation_id)
        self.hub.send_to(msg.source.subscriber, env)

    def handle(self, msg: InboundMessage) -> None:
        sim = self.sim
        env = msg.envelope
        if env.type == "hello":
            state = sim.plan_state
            action = state.current_action()
            self._reply(
                msg,
                "hello",
                {
                    "robot_model": sim.model.to_dict(),
                    "home": [float(v) for v in sim.state.q],
                    "world": sim.world.to_dict(),
                    "delta_t": sim.delta_t,
                    "tick": sim.dt,
                    "condition": sim.condition,
                    "plan_status": {
                        "cursor": state.cursor,
                        "phase": state.phase,
                        "instruction": action.instruction if action else "",
                        "total_steps": len(sim.plan),
                    },
                },
            )
        elif env.type == "calibrate":
            result = sim.world.calibrate(
                Transform.from_dict(env.payload["marker_pose_in_viewer"]),
                Transform.from_dict(env.payload["marker_to_base"]),
                timestamp=sim.clock,
            )
            self._reply(msg, "calibration_result", result.to_dict())
        elif env.type == "object_pose_request":
            oid = env.payload["object_id"]
            if oid in sim.world:
                self._reply(
                    msg,
                    "object_pose_response",
                    {"object_id": oid, "pose": sim.world.object_pose(oid).to_dict()},
                )
            else:
                self._reply(msg, "error", {"message": f"unknown object {oid!r}"})
        elif env.type == "user_input":
            sim.handle_user_input(bool(env.payload["pressed"]))
            sim.flush_external_events()
        elif env.type == "intervention":
            oid = env.payload["object_id"]
            act = sim.scheduler.active_act
            if oid not in sim.world:
                self._reply(msg, "error", {"message": f"unknown object {oid!r}"})
            elif sim.state.attached_object == oid or (act is not None and act.info.object_id == oid):
                self._reply(msg, "error", {"message": f"object {oid!r} is engaged by the robot"})
            else:
                sim.world.update_object_pose(oid, Pose.from_dict(env.payload["new_pose"]), source="intervention")
                sim.flush_external_events()


def validate(config: RunConfig) -> list[str]:
    """Static scenario diagnostics; empty list means runnable."""
    diagnostics: list[str] = []
    try:
        model, home, world, plan = load_scenario(config)
    except ConfigError as exc:
        return [str(exc)]
    if config.delta_t < 0:
        diagnostics.append("delta_t must be >= 0")
    if config.tick <= 0:
        diagnostics.append("tick must be > 0")
    opts = PlannerOptions()
    rng = np.random.default_rng(0)
    checked: set[tuple] = set()

    def check_pose(pose: Pose, label: str):
        key = (round(float(pose.position[0]), 6), round(float(pose.position[1]), 6), round(float(pose.position[2]), 6))
        if key in checked:
            return
        checked.add(key)
        dist = float(np.linalg.norm(pose.position - model.base_frame.position))
        if dist > model.total_reach:
            diagnostics.append(f"{label}: position {dist:.3f} m from base exceeds reach {model.total_reach:.3f} m")
            return
        try:
            solve_keyframe(model, pose, home, opts, rng)
        except UnreachableError:
            diagnostics.append(f"{label}: beyond reach")
        except IkError:
            diagnostics.append(f"{label}: no IK solution found")

    for action in plan.actions:
        label = f"step {action.step_index} ({action.skill} {action.object_id})"
        if action.object_id not in world:
            diagnostics.append(f"{label}: object not in world")
            continue
        grasp = world.get(action.object_id).grasp_pose()
        hover = Pose(grasp.position + np.array([0.0, 0.0, opts.pre_grasp_height]), grasp.orientation)
        check_pose(grasp, f"{label}: grasp pose")
        check_pose(hover, f"{label}: pre-grasp pose")
        if action.place_pose is not None:
            check_pose(action.place_pose, f"{label}: place pose")
        if action.skill == "handover":
            check_pose(opts.handover_pose, f"{label}: handover pose")
    return diagnostics


def replay(log_path: str | Path, tcp_port: int, console_port: int, speed: float = 1.0) -> int:
    """Re-emit a stored event log to connected consoles for demos."""
    from hrcsim.protocol import CATALOG

    records = []
    with open(log_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    hub = Hub()
    inbound: "queue.Queue[InboundMessage]" = queue.Queue()
    try:
        tcp = SocketServer("0.0.0.0", tcp_port, hub, inbound, websocket=False)
        ws = SocketServer("0.0.0.0", console_port, hub, inbound, websocket=True)
    except OSError as exc:
        raise BindError(str(exc)) from exc
    tcp.start()
    ws.start()
    start_wall = time.monotonic()
    t0 = records[0]["t"] if records else 0.0
    try:
        for rec in records:
            if rec["type"] not in CATALOG:
                continue
            target = start_wall + (rec["t"] - t0) / max(speed, 1e-9)
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            hub.broadcast(hub.make_envelope(rec["type"], rec["t"], rec["payload"]))
    except KeyboardInterrupt:
        pass
    finally:
        tcp.close()
        ws.close()
    return EXIT_OK


def make_report(trial_paths: list[str], out_json: str, out_csv: str) -> int:
    trials = load_trials(trial_paths)
    doc = report(trials)
    write_report(doc, out_json, out_csv)
    return EXIT_OK
