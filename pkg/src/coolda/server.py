"""The activity server: owns instances, gives meaning to incoming events.

Every mutation of one activity instance happens under that instance's
lock, so its trace is a total order and an evaluation at sequence n sees
exactly the effects of earlier sequences. Instances are isolated from one
another; dispatching commands to hosts is fire-and-forget with completion
tracking (a failed completion never rolls back a phase change).

Sequence numbers count the sequenced inputs and trigger evaluations:
event receipts, joins, binding edits and each phase-entry evaluation take
a fresh seq; completions and audit errors are stamped with the current
one.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from collections import OrderedDict, deque
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

from . import engine
from .engine import TriggerOccurrence
from .errors import (
    AlreadyJoined,
    InvalidBinding,
    InvalidDefinition,
    MalformedEvent,
    UnknownBinding,
    UnknownInstance,
    UnknownPhase,
    UnknownRole,
)
from .model import (
    TOOL_FAILED_EVENT,
    TOOL_FAILED_SCHEMA,
    ActivityDefinition,
    Binding,
    Command,
    InterActivityEvent,
    ToolDescriptor,
    Trace,
    TraceEntry,
    Trigger,
    Violation,
    map_roles,
    payload_violations,
    validate_activity_definition,
    validate_binding,
)
from .registry import ToolRegistry

logger = logging.getLogger(__name__)

MAX_CASCADE_DEPTH = 16
EVENT_DEDUP_WINDOW = 4096
COMPLETION_DEDUP_WINDOW = 4096


@dataclass(frozen=True)
class SubGrant:
    slot_id: str
    tool_url: str
    artifact_hash: str
    assigned_sub_role: str | None

    def to_obj(self) -> dict:
        return {
            "slot_id": self.slot_id,
            "tool_url": self.tool_url,
            "artifact_hash": self.artifact_hash,
            "assigned_sub_role": self.assigned_sub_role,
        }

    @classmethod
    def from_obj(cls, obj: Mapping) -> "SubGrant":
        return cls(obj["slot_id"], obj["tool_url"], obj["artifact_hash"], obj.get("assigned_sub_role"))


@dataclass(frozen=True)
class JoinGrant:
    """What a joining user gets back: their parent role plus one grant per
    slot telling the host what to instantiate and as whom."""

    instance_id: str
    assigned_parent_role: str
    sub_grants: tuple[SubGrant, ...]

    def to_obj(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "assigned_parent_role": self.assigned_parent_role,
            "sub_grants": [g.to_obj() for g in self.sub_grants],
        }

    @classmethod
    def from_obj(cls, obj: Mapping) -> "JoinGrant":
        return cls(
            obj["instance_id"],
            obj["assigned_parent_role"],
            tuple(SubGrant.from_obj(g) for g in obj.get("sub_grants", [])),
        )


@dataclass(frozen=True)
class SubInstanceInfo:
    slot_id: str
    tool_id: str
    artifact_hash: str
    states: tuple[tuple[str, str], ...] = ()  # user -> reported client state

    def to_obj(self) -> dict:
        return {
            "slot_id": self.slot_id,
            "tool_id": self.tool_id,
            "artifact_hash": self.artifact_hash,
            "states": dict(self.states),
        }


@dataclass(frozen=True)
class ActivityState:
    """Consistent view of one instance as of a single seq."""

    instance_id: str
    definition_id: str
    phase: str
    participants: tuple[tuple[str, str], ...]
    bindings: tuple[Binding, ...]
    sub_instances: tuple[SubInstanceInfo, ...]
    seq: int

    def participants_map(self) -> dict[str, str]:
        return dict(self.participants)

    def to_obj(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "definition_id": self.definition_id,
            "phase": self.phase,
            "participants": dict(self.participants),
            "bindings": [b.to_obj() for b in self.bindings],
            "sub_instances": [s.to_obj() for s in self.sub_instances],
            "seq": self.seq,
        }


@dataclass
class DispatchOutcome:
    event_id: str = ""
    commands: list[Command] = field(default_factory=list)
    phase_changes: list[tuple[str, str]] = field(default_factory=list)
    error: str | None = None
    duplicate: bool = False


@dataclass
class PhaseChange:
    changed: bool
    previous: str
    current: str


class _LruSet:
    def __init__(self, capacity: int):
        self._capacity = capacity
        self._items: OrderedDict[str, None] = OrderedDict()

    def __contains__(self, key: str) -> bool:
        return key in self._items

    def add(self, key: str) -> None:
        self._items[key] = None
        self._items.move_to_end(key)
        while len(self._items) > self._capacity:
            self._items.popitem(last=False)


@dataclass
class _EvalView:
    phase: str
    bindings: tuple[Binding, ...]


class _Instance:
    def __init__(self, instance_id: str, definition: ActivityDefinition, descriptors: dict[str, ToolDescriptor]):
        self.instance_id = instance_id
        self.definition = definition
        self.descriptors = descriptors
        self.phase = definition.initial_phase
        self.participants: dict[str, str] = {}
        self.bindings: list[Binding] = list(definition.bindings)
        self.seq = 0
        self.trace = Trace(instance_id=instance_id)
        self.lock = threading.RLock()
        self.changed = threading.Condition(self.lock)
        self.sub_states: dict[str, dict[str, str]] = {}  # slot -> user -> state
        self.seen_events = _LruSet(EVENT_DEDUP_WINDOW)
        self.dispatched_ids: set[str] = set()
        self.completed = _LruSet(COMPLETION_DEDUP_WINDOW)


class ActivityServer:
    """Transport-agnostic server core. A dispatcher callback delivers
    commands toward hosts; wire/HTTP layers sit on top."""

    def __init__(
        self,
        registry: ToolRegistry,
        max_cascade_depth: int = MAX_CASCADE_DEPTH,
        clock: Callable[[], float] = time.time,
        id_factory: Callable[[], str] = lambda: str(uuid.uuid4()),
        dispatcher: Callable[[str, str, Command], None] | None = None,
    ):
        self.registry = registry
        self.max_cascade_depth = max_cascade_depth
        self._clock = clock
        self._new_id = id_factory
        self._dispatcher = dispatcher or (lambda user, instance, command: None)
        self._instances: dict[str, _Instance] = {}
        self._map_lock = threading.Lock()

    def set_dispatcher(self, dispatcher: Callable[[str, str, Command], None]) -> None:
        self._dispatcher = dispatcher

    # ── helpers ──────────────────────────────────────────────────

    def _get(self, instance_id: str) -> _Instance:
        with self._map_lock:
            inst = self._instances.get(instance_id)
        if inst is None:
            raise UnknownInstance(instance_id)
        return inst

    def instance_ids(self) -> list[str]:
        with self._map_lock:
            return list(self._instances)

    def definition_of(self, instance_id: str) -> ActivityDefinition:
        return self._get(instance_id).definition

    def _trace(self, inst: _Instance, kind: str, data: dict, seq: int | None = None) -> TraceEntry:
        entry = TraceEntry(
            idx=len(inst.trace.entries),
            seq=inst.seq if seq is None else seq,
            ts=self._clock(),
            kind=kind,
            data=tuple(sorted(data.items())),
        )
        inst.trace.entries.append(entry)
        inst.changed.notify_all()
        return entry

    def trace_of(self, instance_id: str) -> Trace:
        inst = self._get(instance_id)
        with inst.lock:
            return Trace(instance_id=instance_id, entries=list(inst.trace.entries))

    def entries_since(self, instance_id: str, after_idx: int, wait: float = 0.0) -> list[TraceEntry]:
        """Trace entries with idx > after_idx, optionally blocking until
        one shows up (used by the push stream)."""
        inst = self._get(instance_id)
        with inst.lock:
            if wait and len(inst.trace.entries) <= after_idx + 1:
                inst.changed.wait(timeout=wait)
            return [e for e in inst.trace.entries if e.idx > after_idx]

    # ── lifecycle ────────────────────────────────────────────────

    def create_activity(self, definition: ActivityDefinition, instance_id: str | None = None) -> str:
        violations = validate_activity_definition(definition)
        if violations:
            raise InvalidDefinition(violations)

        descriptors: dict[str, ToolDescriptor] = {}
        resolution: list[Violation] = []
        for slot in definition.sub_activities:
            try:
                descriptors[slot.slot_id], _ = self.registry.describe_url(slot.tool_url)
            except Exception as exc:
                resolution.append(Violation("tool_unresolvable", f"sub_activities.{slot.slot_id}", str(exc)))
        if resolution:
            raise InvalidDefinition(resolution)

        violations = validate_activity_definition(definition, descriptors)
        if violations:
            raise InvalidDefinition(violations)

        iid = instance_id or self._new_id()
        inst = _Instance(iid, definition, descriptors)
        with self._map_lock:
            self._instances[iid] = inst
        logger.info("created activity %s (%s)", iid, definition.definition_id)
        return iid

    def join(self, instance_id: str, user_id: str, requested_role: str) -> JoinGrant:
        inst = self._get(instance_id)
        with inst.lock:
            if requested_role not in inst.definition.roles:
                raise UnknownRole(requested_role)
            if user_id in inst.participants:
                raise AlreadyJoined(user_id)
            inst.participants[user_id] = requested_role
            assigned = map_roles(inst.definition.role_mappings, requested_role)
            grants = tuple(
                SubGrant(
                    slot_id=s.slot_id,
                    tool_url=s.tool_url,
                    artifact_hash=inst.descriptors[s.slot_id].artifact_hash,
                    assigned_sub_role=assigned.get(s.slot_id),
                )
                for s in inst.definition.sub_activities
            )
            grant = JoinGrant(instance_id, requested_role, grants)
            inst.seq += 1
            self._trace(inst, "ParticipantJoined", {"user_id": user_id, "role": requested_role, "grant": grant.to_obj()})
            return grant

    # ── event pipeline ───────────────────────────────────────────

    def _validate_event(self, inst: _Instance, ev: InterActivityEvent) -> None:
        slot = inst.definition.slot(ev.slot_id)
        if slot is None:
            raise MalformedEvent(f"unknown_slot:{ev.slot_id}")
        if ev.event_name == TOOL_FAILED_EVENT:
            schema: Mapping[str, str] = TOOL_FAILED_SCHEMA
        else:
            sig = inst.descriptors[ev.slot_id].event(ev.event_name)
            if sig is None:
                raise MalformedEvent(f"undeclared_event:{ev.event_name}")
            schema = sig.schema_map()
        problems = payload_violations(ev.payload_map(), schema)
        if problems:
            raise MalformedEvent("; ".join(f"{v.rule}@{v.path}" for v in problems))

    def receive_event(self, ev: InterActivityEvent) -> DispatchOutcome:
        inst = self._get(ev.instance_id)
        with inst.lock:
            if ev.event_id in inst.seen_events:
                return DispatchOutcome(event_id=ev.event_id, duplicate=True)
            self._validate_event(inst, ev)
            inst.seen_events.add(ev.event_id)

            inst.seq += 1
            stamped = replace(ev, emitted_seq=inst.seq)
            self._trace(inst, "EventReceived", {"event": stamped.to_obj()})

            actor_role = inst.participants.get(ev.actor) if ev.actor else None
            first = TriggerOccurrence(
                source=Trigger.tool_event(ev.slot_id, ev.event_name),
                payload=tuple(sorted(ev.payload_map().items())),
                actor=ev.actor,
                actor_role=actor_role,
                depth=1,
            )
            outcome = DispatchOutcome(event_id=ev.event_id)
            self._cascade(inst, first, ev.event_id, inst.seq, outcome)
            return outcome

    def _cascade(
        self,
        inst: _Instance,
        first: TriggerOccurrence,
        first_cause: str,
        first_seq: int,
        outcome: DispatchOutcome,
    ) -> None:
        queue: deque[tuple[TriggerOccurrence, str, int]] = deque([(first, first_cause, first_seq)])
        while queue:
            occ, cause_id, seq = queue.popleft()
            result = engine.evaluate(_EvalView(inst.phase, tuple(inst.bindings)), occ)
            for ev in result.evaluations:
                self._trace(
                    inst,
                    "GuardEvaluated",
                    {
                        "binding_id": ev.binding_id,
                        "passed": ev.guard_passed,
                        "notes": list(ev.notes),
                        "trigger": occ.source.to_obj(),
                        "depth": occ.depth,
                    },
                    seq=seq,
                )
            for eff in result.effects:
                if isinstance(eff, engine.TransitionEffect):
                    self._apply_transition(inst, occ, eff.target_phase, eff.binding_id, seq, queue, outcome)
                else:
                    self._dispatch_command(inst, occ, eff, cause_id, seq, outcome)

    def _apply_transition(
        self,
        inst: _Instance,
        occ: TriggerOccurrence,
        target: str,
        cause: str,
        seq: int,
        queue: deque,
        outcome: DispatchOutcome,
    ) -> None:
        if target == inst.phase:
            return  # self-transition: silent no-op, no trigger
        previous = inst.phase
        inst.phase = target
        self._trace(
            inst,
            "PhaseChanged",
            {"from": previous, "to": target, "cause": cause, "depth": occ.depth},
            seq=seq,
        )
        outcome.phase_changes.append((previous, target))
        next_depth = occ.depth + 1
        if next_depth > self.max_cascade_depth:
            self._trace(
                inst,
                "Error",
                {"kind": "cascade_depth_exceeded", "depth": next_depth, "origin": "server"},
                seq=seq,
            )
            outcome.error = "cascade_depth_exceeded"
            return
        inst.seq += 1
        follow = TriggerOccurrence(
            source=Trigger.phase_entered(target),
            payload=(),
            actor=occ.actor,
            actor_role=occ.actor_role,
            depth=next_depth,
        )
        queue.append((follow, target, inst.seq))

    def _dispatch_command(
        self,
        inst: _Instance,
        occ: TriggerOccurrence,
        eff: engine.CommandEffect,
        cause_id: str,
        seq: int,
        outcome: DispatchOutcome,
    ) -> None:
        target_user = None
        if occ.actor and occ.actor in inst.participants:
            target_user = occ.actor
        elif inst.participants:
            target_user = next(iter(inst.participants))
        cmd = Command(
            command_id=self._new_id(),
            instance_id=inst.instance_id,
            slot_id=eff.slot_id,
            command_name=eff.command_name,
            args=eff.args,
            caused_by=cause_id,
            depth=occ.depth,
        )
        if target_user is None:
            self._trace(
                inst,
                "Error",
                {
                    "kind": "command_unroutable",
                    "slot_id": eff.slot_id,
                    "command_name": eff.command_name,
                    "origin": "server",
                },
                seq=seq,
            )
            return
        inst.dispatched_ids.add(cmd.command_id)
        self._trace(
            inst,
            "CommandDispatched",
            {"command": cmd.to_obj(), "host": target_user, "binding_id": eff.binding_id},
            seq=seq,
        )
        outcome.commands.append(cmd)
        self._dispatcher(target_user, inst.instance_id, cmd)

    def transition_phase(self, instance_id: str, target_phase: str, cause: str = "api") -> PhaseChange:
        inst = self._get(instance_id)
        with inst.lock:
            if target_phase not in inst.definition.phases:
                raise UnknownPhase(target_phase)
            if target_phase == inst.phase:
                return PhaseChange(changed=False, previous=inst.phase, current=inst.phase)
            previous = inst.phase
            inst.phase = target_phase
            inst.seq += 1
            self._trace(inst, "PhaseChanged", {"from": previous, "to": target_phase, "cause": cause, "depth": 0})
            outcome = DispatchOutcome()
            inst.seq += 1
            follow = TriggerOccurrence(source=Trigger.phase_entered(target_phase), depth=1)
            self._cascade(inst, follow, target_phase, inst.seq, outcome)
            return PhaseChange(changed=True, previous=previous, current=target_phase)

    # ── live bindings ────────────────────────────────────────────

    def add_live_binding(self, instance_id: str, binding: Binding) -> str:
        inst = self._get(instance_id)
        with inst.lock:
            violations = validate_binding(inst.definition, binding, inst.descriptors)
            if any(b.binding_id == binding.binding_id for b in inst.bindings):
                violations.append(Violation("binding_id_duplicate", "binding_id", binding.binding_id))
            if violations:
                raise InvalidBinding(violations)
            inst.bindings.append(binding)
            inst.seq += 1
            self._trace(inst, "BindingAdded", {"binding": binding.to_obj()})
            return binding.binding_id

    def remove_live_binding(self, instance_id: str, binding_id: str) -> None:
        inst = self._get(instance_id)
        with inst.lock:
            for i, b in enumerate(inst.bindings):
                if b.binding_id == binding_id:
                    del inst.bindings[i]
                    inst.seq += 1
                    self._trace(inst, "BindingRemoved", {"binding_id": binding_id})
                    return
            raise UnknownBinding(binding_id)

    # ── feedback from hosts ──────────────────────────────────────

    def complete_command(self, instance_id: str, command_id: str, status: str, error: str | None = None) -> None:
        inst = self._get(instance_id)
        with inst.lock:
            if command_id not in inst.dispatched_ids or command_id in inst.completed:
                return  # unknown or duplicate completion: ignore
            inst.completed.add(command_id)
            data: dict[str, Any] = {"command_id": command_id, "status": status}
            if error:
                data["error"] = error
            self._trace(inst, "CommandCompleted", data)

    def record_external_error(self, instance_id: str, kind: str, detail: str) -> None:
        """Audit an error reported by a host (dropped event, overflow...)."""
        inst = self._get(instance_id)
        with inst.lock:
            self._trace(inst, "Error", {"kind": kind, "detail": detail, "origin": "host"})

    def record_sub_states(self, instance_id: str, user_id: str, states: Mapping[str, str]) -> None:
        inst = self._get(instance_id)
        with inst.lock:
            for slot_id, state in states.items():
                inst.sub_states.setdefault(slot_id, {})[user_id] = state

    # ── reads ────────────────────────────────────────────────────

    def snapshot(self, instance_id: str) -> ActivityState:
        inst = self._get(instance_id)
        with inst.lock:
            subs = tuple(
                SubInstanceInfo(
                    slot_id=s.slot_id,
                    tool_id=inst.descriptors[s.slot_id].tool_id,
                    artifact_hash=inst.descriptors[s.slot_id].artifact_hash,
                    states=tuple(sorted(inst.sub_states.get(s.slot_id, {}).items())),
                )
                for s in inst.definition.sub_activities
            )
            return ActivityState(
                instance_id=instance_id,
                definition_id=inst.definition.definition_id,
                phase=inst.phase,
                participants=tuple(inst.participants.items()),
                bindings=tuple(inst.bindings),
                sub_instances=subs,
                seq=inst.seq,
            )
