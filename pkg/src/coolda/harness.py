"""Deterministic end-to-end scenario driver.

A scenario scripts user-visible inputs (joins, tool actions, binding
edits) at logical ticks and checks expectations against the snapshot, the
trace and the tool clients. No sleeps: after every step the whole system
is driven to quiescence (no queued messages anywhere, all handlers done),
so runs are reproducible and the two transports are interchangeable:

  - inprocess: memory channels pumped cooperatively on one thread;
  - sockets:   real TCP with reader threads, quiescence by counters.

Each step injects work through a single acting host, which keeps message
interleaving on the shared channels deterministic in both modes.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .errors import ScenarioTimeout
from .model import (
    ActivityDefinition,
    Binding,
    InterActivityEvent,
    Trace,
    canonical_json,
)
from .registry import ToolRegistry
from .server import ActivityServer
from .service import ActivityService
from .tools import bundled_factories
from .tools.base import BackendHub
from .traceio import TraceDiff, TraceMeta, compare_traces, write_trace_file
from .host import ToolHost
from . import wire

EXPECT_PREDICATES = ("phase_is", "command_dispatched", "tool_state", "event_count")
MODES = ("inprocess", "sockets")
DEFAULT_QUIESCENCE_BUDGET = 5.0


@dataclass(frozen=True)
class ScenarioStep:
    at: int
    action: str
    user: str | None = None
    role: str | None = None
    slot: str | None = None
    op: str | None = None
    args: tuple[tuple[str, Any], ...] = ()
    binding: Binding | None = None
    binding_id: str | None = None
    predicate: str | None = None

    def args_map(self) -> dict[str, Any]:
        return dict(self.args)

    @classmethod
    def from_obj(cls, obj: Mapping) -> "ScenarioStep":
        binding = obj.get("binding")
        return cls(
            at=obj["at"],
            action=obj["action"],
            user=obj.get("user"),
            role=obj.get("role"),
            slot=obj.get("slot"),
            op=obj.get("op"),
            args=tuple(sorted(obj.get("args", {}).items())),
            binding=Binding.from_obj(binding) if binding else None,
            binding_id=obj.get("binding_id"),
            predicate=obj.get("predicate"),
        )

    def to_obj(self) -> dict:
        out: dict[str, Any] = {"at": self.at, "action": self.action}
        for name in ("user", "role", "slot", "op", "binding_id", "predicate"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.args:
            out["args"] = dict(self.args)
        if self.binding is not None:
            out["binding"] = self.binding.to_obj()
        return out


@dataclass(frozen=True)
class ScenarioScript:
    scenario_id: str
    definition: ActivityDefinition
    steps: tuple[ScenarioStep, ...]

    @classmethod
    def from_obj(cls, obj: Mapping) -> "ScenarioScript":
        return cls(
            scenario_id=obj["scenario_id"],
            definition=ActivityDefinition.from_obj(obj["definition"]),
            steps=tuple(ScenarioStep.from_obj(s) for s in obj.get("steps", [])),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioScript":
        with open(path, encoding="utf-8") as src:
            return cls.from_obj(json.load(src))

    def to_obj(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "definition": self.definition.to_obj(),
            "steps": [s.to_obj() for s in self.steps],
        }

    def validate(self) -> list[str]:
        problems = []
        last = None
        for i, step in enumerate(self.steps):
            if last is not None and step.at < last:
                problems.append(f"steps[{i}]: tick {step.at} decreases")
            last = step.at
            if step.action == "join" and (not step.user or not step.role):
                problems.append(f"steps[{i}]: join needs user and role")
            elif step.action == "user_action" and (not step.user or not step.slot or not step.op):
                problems.append(f"steps[{i}]: user_action needs user, slot, op")
            elif step.action == "add_binding" and step.binding is None:
                problems.append(f"steps[{i}]: add_binding needs a binding")
            elif step.action == "remove_binding" and not step.binding_id:
                problems.append(f"steps[{i}]: remove_binding needs binding_id")
            elif step.action == "expect" and step.predicate not in EXPECT_PREDICATES:
                problems.append(f"steps[{i}]: unknown predicate {step.predicate!r}")
            elif step.action not in ("join", "user_action", "add_binding", "remove_binding", "expect"):
                problems.append(f"steps[{i}]: unknown action {step.action!r}")
        return problems


@dataclass
class ExpectResult:
    step_index: int
    predicate: str
    args: dict
    ok: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"[{status}] expect {self.predicate} {canonical_json(self.args)}" + (f" — {self.detail}" if self.detail else "")


@dataclass
class ScenarioRun:
    scenario_id: str
    instance_id: str
    mode: str
    trace: Trace
    meta: TraceMeta
    expects: list[ExpectResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.ok for e in self.expects)

    def write_trace(self, path: str | Path) -> None:
        write_trace_file(path, self.meta, self.trace)


class ScenarioRuntime:
    """Owns every executor of one run: server, service, hosts, channels."""

    def __init__(self, mode: str = "inprocess", quiescence_budget: float = DEFAULT_QUIESCENCE_BUDGET):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.budget = quiescence_budget
        self.hub = BackendHub()
        self.registry = ToolRegistry()
        for factory in bundled_factories(self.hub):
            self.registry.register_inprocess_tool(factory)
        self.server = ActivityServer(self.registry)
        self.service = ActivityService(self.server)
        self.hosts: dict[str, ToolHost] = {}
        self._host_channels: list[wire.MemoryChannel] = []
        self._server_channels: list[wire.MemoryChannel] = []
        self._socket_host_channels: list[wire.SocketChannel] = []
        self._wire_server: wire.WireServer | None = None
        if mode == "sockets":
            self._wire_server = wire.WireServer(0, self._on_connect)
            self._wire_server.start()

    def _on_connect(self, channel: wire.SocketChannel) -> None:
        self.service.attach_channel(channel)

    # ── host management ──────────────────────────────────────────

    def add_host(self, user_id: str) -> ToolHost:
        if user_id in self.hosts:
            return self.hosts[user_id]
        if self.mode == "inprocess":
            host_ch, server_ch = wire.memory_channel_pair()
            self.service.attach_channel(server_ch)
            self._host_channels.append(host_ch)
            self._server_channels.append(server_ch)
            host = ToolHost(user_id, host_ch, self.registry)
        else:
            assert self._wire_server is not None
            channel = wire.connect(self._wire_server.port, label=f"host-{user_id}")
            host = ToolHost(user_id, channel, self.registry)
            channel.start_reader()
            self._socket_host_channels.append(channel)
        self.hosts[user_id] = host
        return host

    # ── quiescence ───────────────────────────────────────────────

    def drive_to_quiescence(self) -> None:
        deadline = time.monotonic() + self.budget
        if self.mode == "inprocess":
            while True:
                moved = False
                for ch in self._server_channels:
                    moved |= ch.pump_one()
                for ch in self._host_channels:
                    moved |= ch.pump_one()
                if not moved:
                    return
                if time.monotonic() > deadline:
                    raise ScenarioTimeout("in-process pump did not drain")
        else:
            stable = 0
            while stable < 2:
                if self._sockets_idle():
                    stable += 1
                else:
                    stable = 0
                if time.monotonic() > deadline:
                    raise ScenarioTimeout("socket channels did not drain")
                time.sleep(0.002)

    def _sockets_idle(self) -> bool:
        assert self._wire_server is not None
        server_side = self._wire_server.channels
        up_sent = sum(ch.sent for ch in self._socket_host_channels)
        up_done = sum(ch.delivered for ch in server_side)
        down_sent = sum(ch.sent for ch in server_side)
        down_done = sum(ch.delivered for ch in self._socket_host_channels)
        pending = sum(h.pending_count() for h in self.hosts.values())
        return up_sent == up_done and down_sent == down_done and pending == 0

    def shutdown(self) -> None:
        for host in self.hosts.values():
            host.shutdown()
        for ch in self._socket_host_channels:
            ch.close()
        if self._wire_server is not None:
            self._wire_server.stop()


# ── expectation predicates ───────────────────────────────────────────


def _check_expect(runtime: ScenarioRuntime, instance_id: str, step: ScenarioStep) -> tuple[bool, str]:
    args = step.args_map()
    if step.predicate == "phase_is":
        phase = runtime.server.snapshot(instance_id).phase
        return phase == args["phase"], f"phase is {phase!r}"
    if step.predicate == "command_dispatched":
        entries = runtime.server.trace_of(instance_id).of_kind("CommandDispatched")
        hits = [
            e
            for e in entries
            if e.data_map()["command"]["slot_id"] == args["slot"]
            and e.data_map()["command"]["command_name"] == args["command"]
        ]
        return bool(hits), f"{len(hits)} dispatches of {args['command']}"
    if step.predicate == "event_count":
        entries = runtime.server.trace_of(instance_id).of_kind("EventReceived")
        n = sum(1 for e in entries if e.data_map()["event"]["event_name"] == args["event"])
        return n == args["count"], f"saw {n} {args['event']} events"
    if step.predicate == "tool_state":
        fieldname, expected = args["field"], args["value"]
        seen: list[Any] = []
        for host in runtime.hosts.values():
            state = host.tool_state(instance_id, args["slot"])
            if state is not None:
                seen.append(state.get(fieldname))
        if not seen:
            return False, f"no live client for slot {args['slot']!r}"
        ok = all(v == expected for v in seen)
        return ok, f"{fieldname} reported as {seen}"
    return False, f"unknown predicate {step.predicate!r}"


# ── the driver ───────────────────────────────────────────────────────


def run_scenario(
    script: ScenarioScript,
    mode: str = "inprocess",
    quiescence_budget: float = DEFAULT_QUIESCENCE_BUDGET,
) -> ScenarioRun:
    problems = script.validate()
    if problems:
        raise ValueError("invalid scenario: " + "; ".join(problems))

    runtime = ScenarioRuntime(mode=mode, quiescence_budget=quiescence_budget)
    try:
        instance_id = runtime.server.create_activity(script.definition)
        run = ScenarioRun(
            scenario_id=script.scenario_id,
            instance_id=instance_id,
            mode=mode,
            trace=Trace(instance_id),
            meta=TraceMeta(instance_id, script.definition),
        )
        for i, step in enumerate(script.steps):
            if step.action == "join":
                host = runtime.add_host(step.user or "")
                host.request_join(instance_id, step.role or "")
            elif step.action == "user_action":
                host = runtime.hosts.get(step.user or "")
                if host is None:
                    raise ValueError(f"steps[{i}]: user {step.user!r} acts before joining")
                host.user_action(instance_id, step.slot or "", step.op or "", step.args_map())
            elif step.action == "add_binding":
                assert step.binding is not None
                runtime.server.add_live_binding(instance_id, step.binding)
            elif step.action == "remove_binding":
                runtime.server.remove_live_binding(instance_id, step.binding_id or "")
            runtime.drive_to_quiescence()
            if step.action == "expect":
                ok, detail = _check_expect(runtime, instance_id, step)
                run.expects.append(ExpectResult(i, step.predicate or "", step.args_map(), ok, detail))
        run.trace = runtime.server.trace_of(instance_id)
        return run
    finally:
        runtime.shutdown()


# ── replay from a recorded trace ─────────────────────────────────────


def replay_trace(meta: TraceMeta, trace: Trace, registry: ToolRegistry | None = None) -> Trace:
    """Re-execute the externally observable inputs of a recorded trace
    against a fresh server and return the regenerated trace.

    Inputs are joins, received events, binding edits, api-phase changes,
    host-reported errors and command completions (matched to the replayed
    dispatches by dispatch order). Everything else must be regenerated by
    evaluation; :func:`compare_traces` then checks it was.
    """
    if registry is None:
        registry = ToolRegistry()
        for factory in bundled_factories(BackendHub()):
            registry.register_inprocess_tool(factory)

    dispatched: list[Any] = []
    server = ActivityServer(registry, dispatcher=lambda user, iid, cmd: dispatched.append(cmd))
    instance_id = server.create_activity(meta.definition)

    original_dispatch_index: dict[str, int] = {}
    for entry in trace.of_kind("CommandDispatched"):
        cid = entry.data_map()["command"]["command_id"]
        original_dispatch_index[cid] = len(original_dispatch_index)

    for entry in trace.entries:
        data = entry.data_map()
        if entry.kind == "ParticipantJoined":
            server.join(instance_id, data["user_id"], data["role"])
        elif entry.kind == "EventReceived":
            ev = InterActivityEvent.from_obj(data["event"])
            ev = replace(ev, instance_id=instance_id, emitted_seq=None)
            server.receive_event(ev)
        elif entry.kind == "BindingAdded":
            server.add_live_binding(instance_id, Binding.from_obj(data["binding"]))
        elif entry.kind == "BindingRemoved":
            server.remove_live_binding(instance_id, data["binding_id"])
        elif entry.kind == "PhaseChanged" and data.get("cause") == "api":
            server.transition_phase(instance_id, data["to"])
        elif entry.kind == "CommandCompleted":
            idx = original_dispatch_index.get(data["command_id"])
            if idx is not None and idx < len(dispatched):
                server.complete_command(instance_id, dispatched[idx].command_id, data["status"], data.get("error"))
        elif entry.kind == "Error" and data.get("origin") == "host":
            server.record_external_error(instance_id, data.get("kind", "?"), data.get("detail", ""))

    return server.trace_of(instance_id)


def replay_check(meta: TraceMeta, trace: Trace, registry: ToolRegistry | None = None) -> TraceDiff:
    return compare_traces(trace, replay_trace(meta, trace, registry))
