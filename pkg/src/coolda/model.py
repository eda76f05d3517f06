"""Domain model shared by every other module.

All values here are immutable after construction and safe to share across
threads. Validation never raises for content problems: violations are
returned as values so callers can aggregate and display them.

Every type has a canonical JSON form (``to_obj``/``from_obj`` plus
:func:`canonical_json`): snake_case field names, sorted keys, UTF-8, no
insignificant whitespace. That encoding *is* the wire and file format used
by the registry, the host/server protocol, and the scenario files.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping
from urllib.parse import urlparse

__all__ = [
    "SEMANTIC_TYPES",
    "COMMAND_NAME_RE",
    "TOOL_ID_RE",
    "TOOL_FAILED_EVENT",
    "TOOL_FAILED_SCHEMA",
    "Violation",
    "OperationSignature",
    "EventSignature",
    "ToolDescriptor",
    "SubActivitySlot",
    "RoleMapping",
    "GuardAtom",
    "Guard",
    "Trigger",
    "Action",
    "Binding",
    "ActivityDefinition",
    "InterActivityEvent",
    "Command",
    "TraceEntry",
    "Trace",
    "canonical_json",
    "value_matches_type",
    "payload_violations",
    "descriptor_violations",
    "validate_binding",
    "validate_activity_definition",
    "map_roles",
]

# Closed set of semantic type tags for params, returns and payload fields.
SEMANTIC_TYPES = frozenset({"string", "integer", "boolean", "user-ref", "role-ref", "json"})

# Integration-surface naming convention: only operations matching this make
# it into a descriptor's command list.
COMMAND_NAME_RE = re.compile(r"^ia_[a-z][a-z0-9_]*$")

TOOL_ID_RE = re.compile(r"^[a-z][a-z0-9-]*$")
SEMVER_RE = re.compile(r"^\d+\.\d+\.\d+$")

GUARD_OPS = ("=", "!=", "<", ">")

# Reserved event name emitted by a host when a tool instance dies; always
# accepted regardless of descriptors so bindings can route around failures.
TOOL_FAILED_EVENT = "tool_failed"
TOOL_FAILED_SCHEMA = {"reason": "string", "slot_id": "string"}


def canonical_json(obj: Any) -> str:
    """Serialize to the canonical form: sorted keys, no extra whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class Violation:
    """One broken invariant: the rule id, where it happened, and the value."""

    rule: str
    path: str
    detail: str = ""

    def to_obj(self) -> dict:
        return {"rule": self.rule, "path": self.path, "detail": self.detail}


# ── tool self-description ────────────────────────────────────────────


@dataclass(frozen=True)
class OperationSignature:
    name: str
    params: tuple[tuple[str, str], ...] = ()  # ordered (name, semantic type)
    returns: str = "void"  # semantic type or "void"

    def to_obj(self) -> dict:
        return {
            "name": self.name,
            "params": [{"name": n, "type": t} for n, t in self.params],
            "returns": self.returns,
        }

    @classmethod
    def from_obj(cls, obj: Mapping) -> "OperationSignature":
        return cls(
            name=obj["name"],
            params=tuple((p["name"], p["type"]) for p in obj.get("params", [])),
            returns=obj.get("returns", "void"),
        )


@dataclass(frozen=True)
class EventSignature:
    name: str
    payload_schema: tuple[tuple[str, str], ...] = ()  # (field, semantic type)

    def schema_map(self) -> dict[str, str]:
        return dict(self.payload_schema)

    def to_obj(self) -> dict:
        return {"name": self.name, "payload_schema": dict(self.payload_schema)}

    @classmethod
    def from_obj(cls, obj: Mapping) -> "EventSignature":
        schema = obj.get("payload_schema", {})
        return cls(name=obj["name"], payload_schema=tuple(sorted(schema.items())))


@dataclass(frozen=True)
class ToolDescriptor:
    """A tool's filtered integration surface plus identity fields."""

    tool_id: str
    version: str
    activity_kind: str
    commands: tuple[OperationSignature, ...]
    events: tuple[EventSignature, ...]
    roles: tuple[str, ...]
    artifact_hash: str = ""

    def command(self, name: str) -> OperationSignature | None:
        for c in self.commands:
            if c.name == name:
                return c
        return None

    def event(self, name: str) -> EventSignature | None:
        for e in self.events:
            if e.name == name:
                return e
        return None

    def with_hash(self, artifact_hash: str) -> "ToolDescriptor":
        return replace(self, artifact_hash=artifact_hash)

    def to_obj(self) -> dict:
        return {
            "tool_id": self.tool_id,
            "version": self.version,
            "activity_kind": self.activity_kind,
            "commands": [c.to_obj() for c in self.commands],
            "events": [e.to_obj() for e in self.events],
            "roles": list(self.roles),
            "artifact_hash": self.artifact_hash,
        }

    @classmethod
    def from_obj(cls, obj: Mapping) -> "ToolDescriptor":
        return cls(
            tool_id=obj["tool_id"],
            version=obj["version"],
            activity_kind=obj["activity_kind"],
            commands=tuple(OperationSignature.from_obj(c) for c in obj.get("commands", [])),
            events=tuple(EventSignature.from_obj(e) for e in obj.get("events", [])),
            roles=tuple(obj.get("roles", [])),
            artifact_hash=obj.get("artifact_hash", ""),
        )


# ── activity definitions ─────────────────────────────────────────────


@dataclass(frozen=True)
class SubActivitySlot:
    slot_id: str
    tool_url: str
    instance_params: tuple[tuple[str, str], ...] = ()

    def params_map(self) -> dict[str, str]:
        return dict(self.instance_params)

    def to_obj(self) -> dict:
        return {
            "slot_id": self.slot_id,
            "tool_url": self.tool_url,
            "instance_params": dict(self.instance_params),
        }

    @classmethod
    def from_obj(cls, obj: Mapping) -> "SubActivitySlot":
        params = obj.get("instance_params", {})
        return cls(
            slot_id=obj["slot_id"],
            tool_url=obj["tool_url"],
            instance_params=tuple(sorted(params.items())),
        )


@dataclass(frozen=True)
class RoleMapping:
    parent_role: str
    slot_id: str
    sub_role: str

    def to_obj(self) -> dict:
        return {"parent_role": self.parent_role, "slot_id": self.slot_id, "sub_role": self.sub_role}

    @classmethod
    def from_obj(cls, obj: Mapping) -> "RoleMapping":
        return cls(obj["parent_role"], obj["slot_id"], obj["sub_role"])


@dataclass(frozen=True)
class GuardAtom:
    """One predicate: ``field op literal`` where field is a payload field
    name or the pseudo-field ``$phase``."""

    fieldname: str
    op: str  # one of GUARD_OPS
    value: Any

    def to_obj(self) -> dict:
        return {"field": self.fieldname, "op": self.op, "value": self.value}

    @classmethod
    def from_obj(cls, obj: Mapping) -> "GuardAtom":
        return cls(obj["field"], obj["op"], obj.get("value"))


@dataclass(frozen=True)
class Guard:
    """Conjunction of atoms; no disjunction, no negation of groups."""

    atoms: tuple[GuardAtom, ...]

    def to_obj(self) -> dict:
        return {"atoms": [a.to_obj() for a in self.atoms]}

    @classmethod
    def from_obj(cls, obj: Mapping) -> "Guard":
        return cls(tuple(GuardAtom.from_obj(a) for a in obj.get("atoms", [])))


@dataclass(frozen=True)
class Trigger:
    """Binding source: a tool event or a phase entry."""

    kind: str  # "tool_event" | "phase_entered"
    slot_id: str | None = None
    event_name: str | None = None
    phase: str | None = None

    @classmethod
    def tool_event(cls, slot_id: str, event_name: str) -> "Trigger":
        return cls(kind="tool_event", slot_id=slot_id, event_name=event_name)

    @classmethod
    def phase_entered(cls, phase: str) -> "Trigger":
        return cls(kind="phase_entered", phase=phase)

    def to_obj(self) -> dict:
        if self.kind == "tool_event":
            return {"kind": "tool_event", "slot_id": self.slot_id, "event_name": self.event_name}
        return {"kind": "phase_entered", "phase": self.phase}

    @classmethod
    def from_obj(cls, obj: Mapping) -> "Trigger":
        if obj["kind"] == "tool_event":
            return cls.tool_event(obj["slot_id"], obj["event_name"])
        if obj["kind"] == "phase_entered":
            return cls.phase_entered(obj["phase"])
        raise ValueError(f"unknown trigger kind: {obj['kind']!r}")


@dataclass(frozen=True)
class Action:
    """Binding effect: invoke a tool command or transition the phase.

    For invoke actions, ``args`` maps each command parameter to a literal,
    a ``payload.<field>`` path, ``$actor`` or ``$role``.
    """

    kind: str  # "invoke_command" | "transition_phase"
    slot_id: str | None = None
    command_name: str | None = None
    args: tuple[tuple[str, Any], ...] = ()
    target_phase: str | None = None

    @classmethod
    def invoke_command(cls, slot_id: str, command_name: str, args: Mapping[str, Any] | None = None) -> "Action":
        items = tuple(sorted((args or {}).items()))
        return cls(kind="invoke_command", slot_id=slot_id, command_name=command_name, args=items)

    @classmethod
    def transition_phase(cls, target_phase: str) -> "Action":
        return cls(kind="transition_phase", target_phase=target_phase)

    def args_map(self) -> dict[str, Any]:
        return dict(self.args)

    def to_obj(self) -> dict:
        if self.kind == "invoke_command":
            return {
                "kind": "invoke_command",
                "slot_id": self.slot_id,
                "command_name": self.command_name,
                "args": dict(self.args),
            }
        return {"kind": "transition_phase", "target_phase": self.target_phase}

    @classmethod
    def from_obj(cls, obj: Mapping) -> "Action":
        if obj["kind"] == "invoke_command":
            return cls.invoke_command(obj["slot_id"], obj["command_name"], obj.get("args", {}))
        if obj["kind"] == "transition_phase":
            return cls.transition_phase(obj["target_phase"])
        raise ValueError(f"unknown action kind: {obj['kind']!r}")


@dataclass(frozen=True)
class Binding:
    binding_id: str
    source: Trigger
    actions: tuple[Action, ...]
    guard: Guard | None = None

    def to_obj(self) -> dict:
        return {
            "binding_id": self.binding_id,
            "source": self.source.to_obj(),
            "guard": self.guard.to_obj() if self.guard else None,
            "actions": [a.to_obj() for a in self.actions],
        }

    @classmethod
    def from_obj(cls, obj: Mapping) -> "Binding":
        guard = obj.get("guard")
        return cls(
            binding_id=obj["binding_id"],
            source=Trigger.from_obj(obj["source"]),
            actions=tuple(Action.from_obj(a) for a in obj.get("actions", [])),
            guard=Guard.from_obj(guard) if guard else None,
        )


@dataclass(frozen=True)
class ActivityDefinition:
    """A parent activity: phases, sub-activity slots, role mappings and the
    statically authored bindings. More bindings may be added on a live
    instance."""

    definition_id: str
    kind: str
    phases: tuple[str, ...]
    initial_phase: str
    roles: tuple[str, ...]
    sub_activities: tuple[SubActivitySlot, ...] = ()
    role_mappings: tuple[RoleMapping, ...] = ()
    bindings: tuple[Binding, ...] = ()

    def slot(self, slot_id: str) -> SubActivitySlot | None:
        for s in self.sub_activities:
            if s.slot_id == slot_id:
                return s
        return None

    def to_obj(self) -> dict:
        return {
            "definition_id": self.definition_id,
            "kind": self.kind,
            "phases": list(self.phases),
            "initial_phase": self.initial_phase,
            "roles": list(self.roles),
            "sub_activities": [s.to_obj() for s in self.sub_activities],
            "role_mappings": [m.to_obj() for m in self.role_mappings],
            "bindings": [b.to_obj() for b in self.bindings],
        }

    @classmethod
    def from_obj(cls, obj: Mapping) -> "ActivityDefinition":
        return cls(
            definition_id=obj["definition_id"],
            kind=obj["kind"],
            phases=tuple(obj["phases"]),
            initial_phase=obj["initial_phase"],
            roles=tuple(obj.get("roles", [])),
            sub_activities=tuple(SubActivitySlot.from_obj(s) for s in obj.get("sub_activities", [])),
            role_mappings=tuple(RoleMapping.from_obj(m) for m in obj.get("role_mappings", [])),
            bindings=tuple(Binding.from_obj(b) for b in obj.get("bindings", [])),
        )


# ── runtime messages ─────────────────────────────────────────────────


@dataclass(frozen=True)
class InterActivityEvent:
    """The upward message: a tool event lifted into the parent activity."""

    event_id: str
    instance_id: str
    slot_id: str
    event_name: str
    payload: tuple[tuple[str, Any], ...] = ()
    actor: str | None = None
    emitted_seq: int | None = None

    def payload_map(self) -> dict[str, Any]:
        return dict(self.payload)

    def to_obj(self) -> dict:
        return {
            "event_id": self.event_id,
            "instance_id": self.instance_id,
            "slot_id": self.slot_id,
            "event_name": self.event_name,
            "payload": dict(self.payload),
            "actor": self.actor,
            "emitted_seq": self.emitted_seq,
        }

    @classmethod
    def from_obj(cls, obj: Mapping) -> "InterActivityEvent":
        return cls(
            event_id=obj["event_id"],
            instance_id=obj["instance_id"],
            slot_id=obj["slot_id"],
            event_name=obj["event_name"],
            payload=tuple(sorted(obj.get("payload", {}).items())),
            actor=obj.get("actor"),
            emitted_seq=obj.get("emitted_seq"),
        )


@dataclass(frozen=True)
class Command:
    """The downward invocation dispatched to the host owning the slot."""

    command_id: str
    instance_id: str
    slot_id: str
    command_name: str
    args: tuple[tuple[str, Any], ...] = ()
    caused_by: str = ""  # originating event_id or phase name
    depth: int = 1

    def args_map(self) -> dict[str, Any]:
        return dict(self.args)

    def to_obj(self) -> dict:
        return {
            "command_id": self.command_id,
            "instance_id": self.instance_id,
            "slot_id": self.slot_id,
            "command_name": self.command_name,
            "args": dict(self.args),
            "caused_by": self.caused_by,
            "depth": self.depth,
        }

    @classmethod
    def from_obj(cls, obj: Mapping) -> "Command":
        return cls(
            command_id=obj["command_id"],
            instance_id=obj["instance_id"],
            slot_id=obj["slot_id"],
            command_name=obj["command_name"],
            args=tuple(sorted(obj.get("args", {}).items())),
            caused_by=obj.get("caused_by", ""),
            depth=obj.get("depth", 1),
        )


# ── trace ────────────────────────────────────────────────────────────

TRACE_KINDS = (
    "EventReceived",
    "GuardEvaluated",
    "CommandDispatched",
    "CommandCompleted",
    "PhaseChanged",
    "BindingAdded",
    "BindingRemoved",
    "ParticipantJoined",
    "Error",
)


@dataclass(frozen=True)
class TraceEntry:
    idx: int  # position in the trace, unique and monotone
    seq: int  # instance sequence number at which the entry happened
    ts: float  # wall clock, ignored by trace comparison
    kind: str
    data: tuple[tuple[str, Any], ...] = ()

    def data_map(self) -> dict[str, Any]:
        return dict(self.data)

    def to_obj(self) -> dict:
        return {"idx": self.idx, "seq": self.seq, "ts": self.ts, "kind": self.kind, "data": dict(self.data)}

    @classmethod
    def from_obj(cls, obj: Mapping) -> "TraceEntry":
        return cls(
            idx=obj["idx"],
            seq=obj["seq"],
            ts=obj["ts"],
            kind=obj["kind"],
            data=tuple(sorted(obj.get("data", {}).items(), key=lambda kv: kv[0])),
        )


@dataclass
class Trace:
    """Totally ordered per-instance record of everything that happened."""

    instance_id: str
    entries: list[TraceEntry] = field(default_factory=list)

    def of_kind(self, kind: str) -> list[TraceEntry]:
        return [e for e in self.entries if e.kind == kind]


# ── validation ───────────────────────────────────────────────────────


def value_matches_type(value: Any, semtype: str) -> bool:
    """Check a concrete value against a semantic type tag.

    booleans are not integers here, despite Python's bool/int subtyping.
    """
    if semtype == "string" or semtype == "user-ref" or semtype == "role-ref":
        return isinstance(value, str)
    if semtype == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if semtype == "boolean":
        return isinstance(value, bool)
    if semtype == "json":
        return True
    return False


def payload_violations(payload: Mapping[str, Any], schema: Mapping[str, str], path: str = "payload") -> list[Violation]:
    """Exact-match conformance: all schema fields present, right types, no extras."""
    out: list[Violation] = []
    for name, semtype in schema.items():
        if name not in payload:
            out.append(Violation("payload_field_missing", f"{path}.{name}", name))
        elif not value_matches_type(payload[name], semtype):
            out.append(Violation("payload_type_mismatch", f"{path}.{name}", semtype))
    for name in payload:
        if name not in schema:
            out.append(Violation("payload_field_unknown", f"{path}.{name}", name))
    return out


def _unique(items: Iterable[str]) -> bool:
    items = list(items)
    return len(items) == len(set(items))


def descriptor_violations(desc: ToolDescriptor) -> list[Violation]:
    out: list[Violation] = []
    if not TOOL_ID_RE.match(desc.tool_id):
        out.append(Violation("bad_tool_id", "tool_id", desc.tool_id))
    if not SEMVER_RE.match(desc.version):
        out.append(Violation("bad_version", "version", desc.version))
    for c in desc.commands:
        if not COMMAND_NAME_RE.match(c.name):
            out.append(Violation("command_name_convention", f"commands.{c.name}", c.name))
        if not _unique(n for n, _ in c.params):
            out.append(Violation("duplicate_param", f"commands.{c.name}.params", c.name))
        for pname, ptype in c.params:
            if ptype not in SEMANTIC_TYPES:
                out.append(Violation("unknown_semantic_type", f"commands.{c.name}.params.{pname}", ptype))
        if c.returns != "void" and c.returns not in SEMANTIC_TYPES:
            out.append(Violation("unknown_semantic_type", f"commands.{c.name}.returns", c.returns))
    if not _unique(c.name for c in desc.commands):
        out.append(Violation("duplicate_command", "commands", desc.tool_id))
    if not _unique(e.name for e in desc.events):
        out.append(Violation("duplicate_event", "events", desc.tool_id))
    for e in desc.events:
        if not e.name:
            out.append(Violation("empty_event_name", "events", desc.tool_id))
        for fname, ftype in e.payload_schema:
            if ftype not in SEMANTIC_TYPES:
                out.append(Violation("unknown_semantic_type", f"events.{e.name}.{fname}", ftype))
    if not desc.roles:
        out.append(Violation("roles_empty", "roles", desc.tool_id))
    return out


def _guard_violations(
    binding: Binding,
    schema: Mapping[str, str] | None,
    path: str,
) -> list[Violation]:
    out: list[Violation] = []
    if binding.guard is None:
        return out
    for i, atom in enumerate(binding.guard.atoms):
        apath = f"{path}.guard.atoms[{i}]"
        if atom.op not in GUARD_OPS:
            out.append(Violation("unknown_guard_op", apath, atom.op))
        if atom.fieldname == "$phase":
            continue
        if schema is not None and atom.fieldname not in schema:
            out.append(Violation("guard_unknown_field", apath, atom.fieldname))
        if schema is None and binding.source.kind == "phase_entered":
            # phase-entry triggers carry no payload, only $phase is addressable
            out.append(Violation("guard_unknown_field", apath, atom.fieldname))
    return out


def validate_binding(
    definition: ActivityDefinition,
    binding: Binding,
    descriptors: Mapping[str, ToolDescriptor] | None = None,
    path: str = "binding",
) -> list[Violation]:
    """Check one binding against a definition and, when available, against
    the slots' tool descriptors (command existence, arg coverage, declared
    events, guard fields)."""
    out: list[Violation] = []
    slot_ids = {s.slot_id for s in definition.sub_activities}

    src = binding.source
    schema: Mapping[str, str] | None = None
    if src.kind == "tool_event":
        if src.slot_id not in slot_ids:
            out.append(Violation("unknown_slot", f"{path}.source", src.slot_id or ""))
        elif descriptors is not None and src.slot_id in descriptors:
            if src.event_name == TOOL_FAILED_EVENT:
                schema = TOOL_FAILED_SCHEMA
            else:
                ev = descriptors[src.slot_id].event(src.event_name or "")
                if ev is None:
                    out.append(Violation("unknown_event", f"{path}.source", src.event_name or ""))
                else:
                    schema = ev.schema_map()
    elif src.kind == "phase_entered":
        if src.phase not in definition.phases:
            out.append(Violation("unknown_phase", f"{path}.source", src.phase or ""))
        schema = {}
    else:
        out.append(Violation("unknown_trigger_kind", f"{path}.source", src.kind))

    if not binding.actions:
        out.append(Violation("empty_actions", f"{path}.actions", binding.binding_id))

    for i, action in enumerate(binding.actions):
        apath = f"{path}.actions[{i}]"
        if action.kind == "transition_phase":
            if action.target_phase not in definition.phases:
                out.append(Violation("unknown_phase", apath, action.target_phase or ""))
        elif action.kind == "invoke_command":
            if action.slot_id not in slot_ids:
                out.append(Violation("unknown_slot", apath, action.slot_id or ""))
            elif descriptors is not None and action.slot_id in descriptors:
                cmd = descriptors[action.slot_id].command(action.command_name or "")
                if cmd is None:
                    out.append(Violation("unknown_command", apath, action.command_name or ""))
                else:
                    given = action.args_map()
                    for pname, _ in cmd.params:
                        if pname not in given:
                            out.append(Violation("arg_map_incomplete", f"{apath}.args", pname))
                    declared = {n for n, _ in cmd.params}
                    for name in given:
                        if name not in declared:
                            out.append(Violation("arg_map_unknown_param", f"{apath}.args", name))
        else:
            out.append(Violation("unknown_action_kind", apath, action.kind))

    out.extend(_guard_violations(binding, schema, path))
    return out


def validate_activity_definition(
    definition: ActivityDefinition,
    descriptors: Mapping[str, ToolDescriptor] | None = None,
) -> list[Violation]:
    """Return every broken invariant of the definition; empty means valid.

    With ``descriptors`` given (slot_id -> ToolDescriptor), bindings are
    additionally checked against the tools' declared commands and events.
    """
    out: list[Violation] = []

    if not definition.phases:
        out.append(Violation("phases_empty", "phases"))
    if not _unique(definition.phases):
        out.append(Violation("phases_duplicate", "phases"))
    if definition.initial_phase not in definition.phases:
        out.append(Violation("initial_phase_missing", "initial_phase", definition.initial_phase))

    if not _unique(s.slot_id for s in definition.sub_activities):
        out.append(Violation("duplicate_slot_id", "sub_activities"))
    for s in definition.sub_activities:
        parsed = urlparse(s.tool_url)
        if parsed.scheme not in ("http", "https", "local") or (
            parsed.scheme in ("http", "https") and not parsed.netloc
        ):
            out.append(Violation("invalid_tool_url", f"sub_activities.{s.slot_id}", s.tool_url))

    slot_ids = {s.slot_id for s in definition.sub_activities}
    seen_pairs: set[tuple[str, str]] = set()
    for i, m in enumerate(definition.role_mappings):
        mpath = f"role_mappings[{i}]"
        if m.parent_role not in definition.roles:
            out.append(Violation("role_mapping_unknown_role", mpath, m.parent_role))
        if m.slot_id not in slot_ids:
            out.append(Violation("role_mapping_unknown_slot", mpath, m.slot_id))
        if (m.parent_role, m.slot_id) in seen_pairs:
            out.append(Violation("role_mapping_duplicate", mpath, f"{m.parent_role}/{m.slot_id}"))
        seen_pairs.add((m.parent_role, m.slot_id))

    if not _unique(b.binding_id for b in definition.bindings):
        out.append(Violation("binding_id_duplicate", "bindings"))
    for i, b in enumerate(definition.bindings):
        out.extend(validate_binding(definition, b, descriptors, path=f"bindings[{i}]"))

    return out


def map_roles(mappings: Iterable[RoleMapping], parent_role: str) -> dict[str, str]:
    """Project a parent role onto the sub-activities.

    Returns slot_id -> sub_role for exactly the mappings that match; slots
    without a mapping are absent and the tool's own default role applies.
    """
    return {m.slot_id: m.sub_role for m in mappings if m.parent_role == parent_role}
