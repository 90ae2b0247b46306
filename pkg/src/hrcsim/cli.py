"""Command-line entry point: run, validate, report, replay.

Every run flag has an HRC_-prefixed environment variable fallback
(e.g. HRC_DELTA_T=2.5). Exit codes: 0 ok, 1 config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys

from hrcsim import app
from hrcsim.app import BindError, ConfigError, RunConfig


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    defaults = RunConfig()
    p.add_argument("--robot", dest="robot_model_path", default=defaults.robot_model_path,
                   help="robot model JSON")
    p.add_argument("--world", dest="world_path", default=defaults.world_path,
                   help="world scene JSON")
    p.add_argument("--plan", dest="plan_path", default=defaults.plan_path,
                   help="plan text file")
    p.add_argument("--delta-t", dest="delta_t", type=float, default=defaults.delta_t,
                   help="anticipation lead time in seconds (default 3.0)")
    p.add_argument("--condition", choices=("C1", "C2"), default=defaults.condition,
                   help="C1 = anticipated stream on, C2 = real motion only")
    p.add_argument("--tick", type=float, default=defaults.tick, help="tick quantum in seconds")
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--mode", choices=("headless", "serve"), default=defaults.mode)
    p.add_argument("--tcp-port", dest="tcp_port", type=int, default=defaults.tcp_port)
    p.add_argument("--console-port", dest="console_port", type=int, default=defaults.console_port)
    p.add_argument("--collision-pause", dest="collision_pause", type=float,
                   default=defaults.collision_pause)
    p.add_argument("--human", dest="human_model", default=defaults.human_model,
                   help="assembly delay model: fixed:<s> or uniform:<lo>,<hi>")
    p.add_argument("--block-prob", dest="block_prob", type=float, default=defaults.block_prob,
                   help="probability per step that the scripted human blocks the arm")
    p.add_argument("--intervene-prob", dest="intervene_prob", type=float,
                   default=defaults.intervene_prob,
                   help="probability per step of a proactive object nudge")
    p.add_argument("--out", dest="out_dir", default=defaults.out_dir)


def _config_from(args: argparse.Namespace) -> RunConfig:
    names = {f.name for f in RunConfig.__dataclass_fields__.values()}
    return RunConfig(**{k: v for k, v in vars(args).items() if k in names})


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="hrcsim",
                                     description="anticipatory motion-preview collaboration simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one trial (headless or serving consoles)")
    _add_run_flags(run_p)

    val_p = sub.add_parser("validate", help="static scenario checks without running")
    _add_run_flags(val_p)

    rep_p = sub.add_parser("report", help="summarize stored trial records")
    rep_p.add_argument("trials", nargs="+", help="trial.json files (ndjson)")
    rep_p.add_argument("--json", dest="out_json", default="report.json")
    rep_p.add_argument("--csv", dest="out_csv", default="report.csv")

    replay_p = sub.add_parser("replay", help="re-emit an event log to consoles")
    replay_p.add_argument("log", help="events.ndjson from a previous run")
    replay_p.add_argument("--tcp-port", type=int, default=RunConfig().tcp_port)
    replay_p.add_argument("--console-port", type=int, default=RunConfig().console_port)
    replay_p.add_argument("--speed", type=float, default=1.0)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return app.run(_config_from(args))
        if args.command == "validate":
            diagnostics = app.validate(_config_from(args))
            for d in diagnostics:
                print(d)
            print(f"{len(diagnostics)} problem(s) found" if diagnostics else "scenario ok")
            return app.EXIT_CONFIG if diagnostics else app.EXIT_OK
        if args.command == "report":
            return app.make_report(args.trials, args.out_json, args.out_csv)
        if args.command == "replay":
            return app.replay(args.log, args.tcp_port, args.console_port, args.speed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return app.EXIT_CONFIG
    except BindError as exc:
        print(f"bind error: {exc}", file=sys.stderr)
        return app.EXIT_RUNTIME
    except Exception as exc:  # runtime failures map to exit code 2
        print(f"runtime error: {exc}", file=sys.stderr)
        return app.EXIT_RUNTIME
    return app.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
