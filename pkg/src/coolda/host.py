"""Client-side tool host: one per user, co-located with the tool clients.

Events captured from tool instances and commands invoked on them cross no
network boundary here; only the host↔server link does. Delivery contract:
at-least-once attempts per event id upward (bounded retry queue), at most
one invocation per command id downward (LRU dedup with completion replay),
so the composed end-to-end effect is exactly-once per id.

A tool that raises something other than a tool-level rejection is marked
failed and a synthetic ``tool_failed`` event goes upward so bindings can
route around the corpse.
"""

from __future__ import annotations

import logging
import threading
import uuid
from collections import OrderedDict, deque
from dataclasses import dataclass, replace
from typing import Any

from .errors import (
    ArgTypeMismatch,
    CommandRejected,
    InstantiationFailed,
    ToolError,
    ToolUnavailable,
    UnknownCommand,
    UnknownRole,
)
from .model import (
    TOOL_FAILED_EVENT,
    Command,
    InterActivityEvent,
    SubActivitySlot,
    ToolDescriptor,
    value_matches_type,
)
from .registry import PluginArtifact, ToolRegistry
from .tools.base import ToolInstance
from .wire import Channel, ChannelClosed

logger = logging.getLogger(__name__)

EVENT_QUEUE_LIMIT = 1024
COMMAND_DEDUP_WINDOW = 4096

_STATE_FLOW = {"starting": ("running", "failed"), "running": ("stopped", "failed"), "stopped": (), "failed": ()}


@dataclass(frozen=True)
class ToolInstanceRef:
    handle_id: str
    slot_id: str
    tool_id: str
    state: str = "starting"

    def advanced(self, state: str) -> "ToolInstanceRef":
        if state not in _STATE_FLOW[self.state]:
            raise ValueError(f"illegal state transition {self.state} -> {state}")
        return replace(self, state=state)

    def to_obj(self) -> dict:
        return {"handle_id": self.handle_id, "slot_id": self.slot_id, "tool_id": self.tool_id, "state": self.state}


class _LocalTool:
    def __init__(self, ref: ToolInstanceRef, instance: ToolInstance, descriptor: ToolDescriptor):
        self.ref = ref
        self.instance = instance
        self.descriptor = descriptor
        self.lock = threading.RLock()  # serializes invocations per instance


class ToolHost:
    """The runtime around one user's tool clients."""

    def __init__(self, user_id: str, channel: Channel, registry: ToolRegistry):
        self.user_id = user_id
        self.registry = registry
        self._channel = channel
        self._lock = threading.RLock()
        self._tools: dict[tuple[str, str], _LocalTool] = {}  # (instance_id, slot_id)
        self._completions: OrderedDict[str, dict] = OrderedDict()  # command_id -> completion body
        self._pending: deque[tuple[str, dict]] = deque()  # undelivered upward messages
        self._dropped = 0
        self.invocations: list[str] = []  # command_ids actually invoked (instrumentation)
        self.join_errors: list[dict] = []
        channel.on_message(self._on_message)
        channel.send("hello", {"host_id": user_id})

    # ── upward sending with bounded retry queue ──────────────────

    def _send_up(self, type: str, body: dict) -> None:
        with self._lock:
            self._pending.append((type, body))
            while len(self._pending) > EVENT_QUEUE_LIMIT:
                self._pending.popleft()
                self._dropped += 1
            self.flush()

    def flush(self) -> bool:
        """Try to deliver queued upward messages; False if the link is down."""
        with self._lock:
            while self._pending:
                type_, body = self._pending[0]
                try:
                    self._channel.send(type_, body)
                except ChannelClosed:
                    return False
                self._pending.popleft()
            if self._dropped:
                note = {"kind": "event_queue_overflow", "detail": str(self._dropped)}
                try:
                    self._channel.send("error", note)
                    self._dropped = 0
                except ChannelClosed:
                    return False
            return True

    def pending_count(self) -> int:
        with self._lock:
            return len(self._pending)

    # ── join and provisioning ────────────────────────────────────

    def request_join(self, instance_id: str, requested_role: str) -> None:
        self._send_up("join", {"instance_id": instance_id, "user_id": self.user_id, "requested_role": requested_role})

    def _on_message(self, env) -> None:
        body = env.body_map()
        if env.type == "join":
            if "error" in body:
                self.join_errors.append(body)
                logger.warning("join refused for %s: %s", self.user_id, body["error"])
            else:
                self._provision(body["grant"])
        elif env.type == "command_down":
            self.handle_command(Command.from_obj(body["command"]))
        elif env.type == "error":
            logger.warning("server error toward host %s: %s", self.user_id, body)

    def _provision(self, grant_obj: dict) -> None:
        from .server import JoinGrant  # local import to keep layering one-way

        grant = JoinGrant.from_obj(grant_obj)
        states: dict[str, str] = {}
        for sub in grant.sub_grants:
            try:
                artifact = self.registry.fetch_plugin(sub.tool_url)
                if artifact.artifact_hash != sub.artifact_hash:
                    raise InstantiationFailed(
                        f"artifact hash mismatch for {sub.tool_url}: {artifact.artifact_hash[:12]} != {sub.artifact_hash[:12]}"
                    )
                slot = SubActivitySlot(slot_id=sub.slot_id, tool_url=sub.tool_url)
                ref = self.instantiate_tool(artifact, slot, sub.assigned_sub_role, grant.instance_id)
                states[sub.slot_id] = ref.state
            except Exception as exc:
                logger.warning("provisioning %s failed for %s: %s", sub.slot_id, self.user_id, exc)
                states[sub.slot_id] = "failed"
                self._send_up(
                    "error",
                    {"kind": "provisioning_failed", "detail": f"{sub.slot_id}: {exc}", "instance_id": grant.instance_id},
                )
        self._send_up("state_sync", {"instance_id": grant.instance_id, "user_id": self.user_id, "states": states})

    def instantiate_tool(
        self,
        artifact: PluginArtifact,
        slot: SubActivitySlot,
        assigned_role: str | None,
        instance_id: str,
    ) -> ToolInstanceRef:
        factory = self.registry.load_factory(artifact)
        descriptor, _ = self.registry.describe_tool(artifact)
        if assigned_role is not None and assigned_role not in descriptor.roles:
            raise UnknownRole(assigned_role)

        params = dict(slot.params_map())
        params.update({"$instance": instance_id, "$slot": slot.slot_id, "$user": self.user_id})
        ref = ToolInstanceRef(handle_id=str(uuid.uuid4()), slot_id=slot.slot_id, tool_id=descriptor.tool_id)
        try:
            instance = factory.instantiate(params, assigned_role)
        except UnknownRole:
            raise
        except Exception as exc:
            raise InstantiationFailed(str(exc)) from exc

        instance.subscribe(
            lambda name, payload, actor: self.forward_event(instance_id, slot.slot_id, name, payload, actor)
        )
        ref = ref.advanced("running")
        with self._lock:
            self._tools[(instance_id, slot.slot_id)] = _LocalTool(ref, instance, descriptor)
        return ref

    # ── upward events (step 3 → 4) ───────────────────────────────

    def forward_event(
        self,
        instance_id: str,
        slot_id: str,
        event_name: str,
        payload: dict,
        actor: str | None,
    ) -> None:
        tool = self._tools.get((instance_id, slot_id))
        declared = event_name == TOOL_FAILED_EVENT or (
            tool is not None and tool.descriptor.event(event_name) is not None
        )
        if not declared:
            logger.warning("dropping undeclared event %s from %s", event_name, slot_id)
            self._send_up(
                "error",
                {"kind": "undeclared_event", "detail": f"{slot_id}/{event_name}", "instance_id": instance_id},
            )
            return
        event = InterActivityEvent(
            event_id=str(uuid.uuid4()),
            instance_id=instance_id,
            slot_id=slot_id,
            event_name=event_name,
            payload=tuple(sorted(payload.items())),
            actor=actor,
        )
        self.forward_raw_event(event)

    def forward_raw_event(self, event: InterActivityEvent) -> None:
        """Send an already-built event; reused for retries and tests."""
        self._send_up("event_up", {"event": event.to_obj()})

    # ── downward commands (step 5 → 6) ───────────────────────────

    def handle_command(self, cmd: Command) -> dict:
        with self._lock:
            if cmd.command_id in self._completions:
                completion = self._completions[cmd.command_id]  # replay, do not re-invoke
                self._send_up("completion", completion)
                return completion

        tool = self._tools.get((cmd.instance_id, cmd.slot_id))
        if tool is None:
            completion = self._completion(cmd, "error", "unknown_slot")
        else:
            try:
                self.invoke(tool.ref, cmd.command_name, cmd.args_map())
                self.invocations.append(cmd.command_id)
                completion = self._completion(cmd, "ok")
            except (ToolUnavailable, CommandRejected, ArgTypeMismatch, UnknownCommand) as exc:
                completion = self._completion(cmd, "error", f"{type(exc).__name__}: {exc}")
            except Exception as exc:  # tool blew up: mark failed, tell the server
                logger.warning("tool %s failed during %s: %s", cmd.slot_id, cmd.command_name, exc)
                self._mark_failed(cmd.instance_id, cmd.slot_id, str(exc))
                completion = self._completion(cmd, "error", f"tool_failed: {exc}")

        with self._lock:
            self._completions[cmd.command_id] = completion
            self._completions.move_to_end(cmd.command_id)
            while len(self._completions) > COMMAND_DEDUP_WINDOW:
                self._completions.popitem(last=False)
        self._send_up("completion", completion)
        return completion

    def _completion(self, cmd: Command, status: str, error: str | None = None) -> dict:
        body = {"instance_id": cmd.instance_id, "command_id": cmd.command_id, "status": status}
        if error:
            body["error"] = error
        return body

    def invoke(self, ref: ToolInstanceRef, command_name: str, args: dict) -> Any:
        tool = next((t for t in self._tools.values() if t.ref.handle_id == ref.handle_id), None)
        if tool is None or tool.ref.state != "running":
            raise ToolUnavailable(ref.slot_id)
        signature = tool.descriptor.command(command_name)
        if signature is None:
            raise UnknownCommand(command_name)
        declared = dict(signature.params)
        for name, semtype in declared.items():
            if name not in args:
                raise ArgTypeMismatch(f"missing argument {name!r}")
            if not value_matches_type(args[name], semtype):
                raise ArgTypeMismatch(f"argument {name!r} is not a {semtype}")
        for name in args:
            if name not in declared:
                raise ArgTypeMismatch(f"unexpected argument {name!r}")
        with tool.lock:
            try:
                return tool.instance.invoke(command_name, args)
            except ToolError as exc:
                raise CommandRejected(str(exc)) from exc

    def _mark_failed(self, instance_id: str, slot_id: str, reason: str) -> None:
        tool = self._tools.get((instance_id, slot_id))
        if tool is None:
            return
        with self._lock:
            tool.ref = tool.ref.advanced("failed")
        self.forward_event(
            instance_id,
            slot_id,
            TOOL_FAILED_EVENT,
            {"reason": reason, "slot_id": slot_id},
            None,
        )

    # ── user-level access (the human in front of this host) ─────

    def user_action(self, instance_id: str, slot_id: str, op: str, args: dict) -> Any:
        tool = self._tools.get((instance_id, slot_id))
        if tool is None or tool.ref.state != "running":
            raise ToolUnavailable(slot_id)
        with tool.lock:
            return tool.instance.user_action(op, args)

    def tool_ref(self, instance_id: str, slot_id: str) -> ToolInstanceRef | None:
        tool = self._tools.get((instance_id, slot_id))
        return tool.ref if tool else None

    def tool_state(self, instance_id: str, slot_id: str) -> dict | None:
        tool = self._tools.get((instance_id, slot_id))
        return tool.instance.public_state() if tool else None

    def shutdown_tool(self, instance_id: str, slot_id: str) -> None:
        tool = self._tools.get((instance_id, slot_id))
        if tool and tool.ref.state == "running":
            tool.instance.shutdown()
            tool.ref = tool.ref.advanced("stopped")

    def shutdown(self) -> None:
        for (iid, sid) in list(self._tools):
            self.shutdown_tool(iid, sid)
