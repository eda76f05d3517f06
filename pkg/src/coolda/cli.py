"""The coolda command line.

  coolda describe <url>            print a tool's descriptor (canonical JSON)
  coolda lint <definition.json>    cascade report; exit 4 when cycles exist
  coolda run-scenario <file>       drive a scenario, check its expectations
  coolda replay --check <trace>    re-execute a trace's inputs and diff
  coolda serve                     wire + console HTTP server
  coolda serve-tools --dir D       static HTTP server for tool artifacts

Exit codes: describe 0/2 (not a plugin)/3 (network), lint 4 on cycles,
run-scenario and replay 0/1 on pass/fail.
"""

from __future__ import annotations

import argparse
import functools
import http.server
import json
import sys
import threading
from pathlib import Path

from .errors import (
    CooldaError,
    DescribeFailed,
    EmptyBody,
    HttpStatus,
    NetworkUnreachable,
    NotAPlugin,
)
from .harness import ScenarioScript, replay_check, run_scenario
from .httpapi import ConsoleApi
from .model import ActivityDefinition, canonical_json
from .registry import ToolRegistry
from .server import ActivityServer
from .service import ActivityService
from .tools import bundled_factories
from .traceio import read_trace_file
from .wire import WireServer
from . import engine, report


def default_registry() -> ToolRegistry:
    registry = ToolRegistry()
    for factory in bundled_factories():
        registry.register_inprocess_tool(factory)
    return registry


def _cmd_describe(args: argparse.Namespace) -> int:
    registry = default_registry()
    try:
        descriptor, raw = registry.describe_url(args.url)
    except (NotAPlugin, DescribeFailed) as exc:
        print(f"not a plugin: {exc}", file=sys.stderr)
        return 2
    except (NetworkUnreachable, HttpStatus, EmptyBody) as exc:
        print(f"fetch failed: {exc}", file=sys.stderr)
        return 3
    print(canonical_json(descriptor.to_obj()))
    if args.raw:
        print(canonical_json(raw.to_obj()), file=sys.stderr)
    return 0


def _load_definition(path: str) -> ActivityDefinition:
    with open(path, encoding="utf-8") as src:
        return ActivityDefinition.from_obj(json.load(src))


def _cmd_lint(args: argparse.Namespace) -> int:
    registry = default_registry()
    definition = _load_definition(args.definition)
    descriptors = {}
    for slot in definition.sub_activities:
        try:
            descriptors[slot.slot_id], _ = registry.describe_url(slot.tool_url)
        except CooldaError as exc:
            print(f"warning: cannot resolve {slot.slot_id}: {exc}", file=sys.stderr)
    graph = engine.static_cascade_report(definition, descriptors)
    print(canonical_json(graph.to_obj()))
    if args.figure_out:
        out = report.render_cascade_graph(graph, args.figure_out, title=definition.definition_id)
        print(f"figure written to {out}", file=sys.stderr)
    return 4 if graph.has_cycles else 0


def _cmd_run_scenario(args: argparse.Namespace) -> int:
    script = ScenarioScript.load(args.scenario)
    run = run_scenario(script, mode=args.mode, quiescence_budget=args.budget)
    for result in run.expects:
        print(result.line())
    if args.trace_out:
        run.write_trace(args.trace_out)
        print(f"trace written to {args.trace_out}", file=sys.stderr)
    if args.figure_out:
        out = report.render_trace_timeline(run.trace, args.figure_out, title=run.scenario_id)
        print(f"figure written to {out}", file=sys.stderr)
    print(f"{run.scenario_id}: {'PASS' if run.passed else 'FAIL'} ({len(run.expects)} expectations)")
    return 0 if run.passed else 1


def _cmd_replay(args: argparse.Namespace) -> int:
    meta, trace = read_trace_file(args.trace)
    diff = replay_check(meta, trace, default_registry())
    if diff.empty:
        print(f"replay consistent: {len(trace.entries)} entries reproduced")
        return 0
    print(diff.describe(), file=sys.stderr)
    return 1


def _cmd_serve(args: argparse.Namespace) -> int:
    registry = default_registry()
    server = ActivityServer(registry)
    service = ActivityService(server)
    wire_server = WireServer(args.port, service.attach_channel)
    wire_server.start()
    console = ConsoleApi(server, port=args.http_port, static_dir=args.console_dir)
    console.start()

    if args.definition:
        instance_id = server.create_activity(_load_definition(args.definition))
        print(f"created instance {instance_id}")

    print(f"wire protocol on 127.0.0.1:{wire_server.port}, console API on http://127.0.0.1:{console.port}")
    sys.stdout.flush()
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        console.stop()
        wire_server.stop()
    return 0


def _cmd_serve_tools(args: argparse.Namespace) -> int:
    directory = args.dir or str(Path(__file__).parent / "artifacts")
    handler = functools.partial(http.server.SimpleHTTPRequestHandler, directory=directory)
    httpd = http.server.ThreadingHTTPServer(("127.0.0.1", args.port), handler)
    print(f"serving tool artifacts from {directory} on http://127.0.0.1:{httpd.server_address[1]}")
    sys.stdout.flush()
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coolda", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="fetch and describe a tool")
    p.add_argument("url")
    p.add_argument("--raw", action="store_true", help="also print the unfiltered surface to stderr")
    p.set_defaults(func=_cmd_describe)

    p = sub.add_parser("lint", help="static cascade report for a definition")
    p.add_argument("definition")
    p.add_argument("--figure-out", help="render the cascade graph to this file")
    p.set_defaults(func=_cmd_lint)

    p = sub.add_parser("run-scenario", help="run a scenario script")
    p.add_argument("scenario")
    p.add_argument("--mode", choices=("inprocess", "sockets"), default="inprocess")
    p.add_argument("--trace-out", help="write the trace as JSON lines")
    p.add_argument("--figure-out", help="render the trace timeline to this file")
    p.add_argument("--budget", type=float, default=5.0, help="quiescence budget in seconds")
    p.set_defaults(func=_cmd_run_scenario)

    p = sub.add_parser("replay", help="re-execute a recorded trace and compare")
    p.add_argument("--check", dest="trace", required=True, help="trace file to check")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("serve", help="run the activity server")
    p.add_argument("--port", type=int, default=7010, help="wire protocol port")
    p.add_argument("--http-port", type=int, default=7080, help="console API port")
    p.add_argument("--definition", help="create an instance from this definition at startup")
    p.add_argument("--console-dir", help="serve console static files from this directory")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("serve-tools", help="serve tool artifacts over plain HTTP")
    p.add_argument("--dir", help="artifact directory (defaults to the bundled one)")
    p.add_argument("--port", type=int, default=7090)
    p.set_defaults(func=_cmd_serve_tools)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
