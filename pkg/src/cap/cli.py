"""Command line entry points: serve, replay, sweep, gen-scenario."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import SessionConfig
from .evaluate import (
    DEFAULT_VOCAB_A,
    DEFAULT_VOCAB_B,
    load_scenarios,
    make_shift_scenario,
    parse_grid,
    run_scenario,
    sweep_theta,
    write_metrics_csv,
    write_trace,
)
from .gateway import GatewayService
from .service import create_app
from .upstream import offline_from_env


def _load_config_file(path: str) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def _session_defaults(file_config: dict) -> SessionConfig:
    fields = {
        key: value
        for key, value in file_config.items()
        if key in SessionConfig().to_dict()
    }
    return SessionConfig().merged(fields)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    file_config = _load_config_file(args.config) if args.config else {}
    offline = args.offline or offline_from_env() or bool(file_config.get("offline_mode"))
    service = GatewayService(
        defaults=_session_defaults(file_config),
        offline=offline,
        log_dir=args.log_dir or file_config.get("log_dir"),
    )
    app = create_app(service)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    scenarios = load_scenarios(args.script)
    traces = [run_scenario(s, on_clarify=args.on_clarify) for s in scenarios]
    flat = [record for trace in traces for record in trace]
    if args.out:
        write_trace(flat, args.out)
    else:
        write_trace(flat, sys.stdout)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    scenarios = load_scenarios(args.scenario)
    grid = parse_grid(args.grid)
    rows = sweep_theta(scenarios, grid, on_clarify=args.on_clarify)
    if args.out:
        write_metrics_csv(rows, args.out)
    else:
        write_metrics_csv(rows, sys.stdout)
    return 0


def cmd_gen_scenario(args: argparse.Namespace) -> int:
    scenario = make_shift_scenario(
        vocab_a=args.vocab_a.split() if args.vocab_a else DEFAULT_VOCAB_A,
        vocab_b=args.vocab_b.split() if args.vocab_b else DEFAULT_VOCAB_B,
        shift_at=args.shift_at,
        total_turns=args.turns,
        gap_seconds=args.gap,
        pause_seconds=args.pause,
        name=args.name,
    )
    line = json.dumps(scenario.to_record(), ensure_ascii=False) + "\n"
    if args.out:
        Path(args.out).write_text(line, encoding="utf-8")
    else:
        sys.stdout.write(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cap", description="context-alignment gateway tools")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP gateway")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--config", help="JSON file with session defaults / log_dir")
    serve.add_argument("--log-dir", help="directory for per-session event logs")
    serve.add_argument("--offline", action="store_true", help="template expander + reference embedder + echo generator")
    serve.set_defaults(func=cmd_serve)

    replay = sub.add_parser("replay", help="run a scripted dialog offline and emit the trace")
    replay.add_argument("--script", required=True, help="scenario file (JSON lines)")
    replay.add_argument("--out", help="trace output path (default: stdout)")
    replay.add_argument("--on-clarify", choices=["a", "b"], default="a")
    replay.set_defaults(func=cmd_replay)

    sweep = sub.add_parser("sweep", help="sweep theta over a scenario and write metrics CSV")
    sweep.add_argument("--scenario", required=True)
    sweep.add_argument("--grid", default="0.05:0.95:0.05", help="start:stop:step or comma list")
    sweep.add_argument("--out", help="CSV output path (default: stdout)")
    sweep.add_argument("--on-clarify", choices=["a", "b"], default="a")
    sweep.set_defaults(func=cmd_sweep)

    gen = sub.add_parser("gen-scenario", help="generate a synthetic vocab-shift scenario")
    gen.add_argument("--vocab-a", help="space-separated topic-A words")
    gen.add_argument("--vocab-b", help="space-separated topic-B words (disjoint from A)")
    gen.add_argument("--shift-at", type=int, default=4, help="1-based turn of the topic shift")
    gen.add_argument("--turns", type=int, default=6)
    gen.add_argument("--gap", type=float, default=60.0, help="seconds between turns")
    gen.add_argument("--pause", type=float, default=3600.0, help="extra pause before the shift turn")
    gen.add_argument("--name", default="vocab-shift")
    gen.add_argument("--out", help="scenario output path (default: stdout)")
    gen.set_defaults(func=cmd_gen_scenario)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
