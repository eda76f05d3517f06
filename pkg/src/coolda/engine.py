"""Pure binding evaluation: trigger occurrence in, ordered effects out.

This is the meaning-assignment step between an incoming event (or phase
entry) and the commands/phase transitions it produces, isolated from all
I/O so it can be checked against a brute-force oracle.

Evaluation semantics:
  - a binding participates iff its source matches the trigger;
  - its guard (a conjunction of atoms) is checked against the trigger
    payload and the *pre*-state phase; a missing guard field skips the
    binding and is noted in the result rather than failing the evaluation;
  - effects of all participating bindings are concatenated in binding
    order; every effect sees the same pre-state (chained reactions happen
    only through subsequent triggers at depth+1, driven by the server).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import networkx as nx

from .model import (
    TOOL_FAILED_EVENT,
    ActivityDefinition,
    Binding,
    ToolDescriptor,
    Trigger,
)

__all__ = [
    "TriggerOccurrence",
    "CommandEffect",
    "TransitionEffect",
    "BindingEvaluation",
    "EffectList",
    "ArgResolutionFailed",
    "resolve_args",
    "evaluate",
    "CascadeGraph",
    "static_cascade_report",
    "trigger_key",
]

ACTOR_VAR = "$actor"
ROLE_VAR = "$role"
PAYLOAD_PREFIX = "payload."


@dataclass(frozen=True)
class TriggerOccurrence:
    """A concrete firing of a trigger, with the data guards and arg maps
    may draw from."""

    source: Trigger
    payload: tuple[tuple[str, Any], ...] = ()
    actor: str | None = None
    actor_role: str | None = None  # the actor's role in the parent activity
    depth: int = 1

    def payload_map(self) -> dict[str, Any]:
        return dict(self.payload)


@dataclass(frozen=True)
class CommandEffect:
    slot_id: str
    command_name: str
    args: tuple[tuple[str, Any], ...]
    binding_id: str

    def args_map(self) -> dict[str, Any]:
        return dict(self.args)


@dataclass(frozen=True)
class TransitionEffect:
    target_phase: str
    binding_id: str


@dataclass(frozen=True)
class BindingEvaluation:
    """Outcome for one binding whose source matched the trigger."""

    binding_id: str
    guard_passed: bool
    notes: tuple[str, ...] = ()  # skipped-binding / skipped-action reasons


@dataclass(frozen=True)
class EffectList:
    evaluations: tuple[BindingEvaluation, ...]
    effects: tuple[CommandEffect | TransitionEffect, ...]


class ArgResolutionFailed(Exception):
    def __init__(self, path: str):
        super().__init__(f"cannot resolve argument source {path!r}")
        self.path = path


def resolve_args(
    arg_map: Mapping[str, Any],
    payload: Mapping[str, Any],
    actor: str | None,
    assigned_role: str | None,
) -> dict[str, Any]:
    """Turn an action's arg map into concrete arguments.

    ``$actor``/``$role`` substitute the trigger actor and their parent
    role; ``payload.<field>`` looks the field up; anything else passes
    through as a literal.
    """
    out: dict[str, Any] = {}
    for name, source in arg_map.items():
        if source == ACTOR_VAR:
            if actor is None:
                raise ArgResolutionFailed(ACTOR_VAR)
            out[name] = actor
        elif source == ROLE_VAR:
            if assigned_role is None:
                raise ArgResolutionFailed(ROLE_VAR)
            out[name] = assigned_role
        elif isinstance(source, str) and source.startswith(PAYLOAD_PREFIX):
            key = source[len(PAYLOAD_PREFIX):]
            if key not in payload:
                raise ArgResolutionFailed(source)
            out[name] = payload[key]
        else:
            out[name] = source
    return out


def _source_matches(source: Trigger, occurred: Trigger) -> bool:
    if source.kind != occurred.kind:
        return False
    if source.kind == "tool_event":
        return source.slot_id == occurred.slot_id and source.event_name == occurred.event_name
    return source.phase == occurred.phase


class _GuardFieldMissing(Exception):
    def __init__(self, fieldname: str):
        self.fieldname = fieldname


def _atom_holds(fieldname: str, op: str, literal: Any, payload: Mapping[str, Any], phase: str) -> bool:
    if fieldname == "$phase":
        value = phase
    elif fieldname in payload:
        value = payload[fieldname]
    else:
        raise _GuardFieldMissing(fieldname)
    try:
        if op == "=":
            return value == literal
        if op == "!=":
            return value != literal
        if op == "<":
            return value < literal
        if op == ">":
            return value > literal
    except TypeError:
        return False  # incomparable types: the atom just does not hold
    return False


def evaluate(state: Any, trigger: TriggerOccurrence) -> EffectList:
    """Evaluate every binding of ``state`` against one trigger occurrence.

    ``state`` needs ``.phase`` (current phase name) and ``.bindings``
    (ordered bindings). Pure: no side effects, output depends only on the
    arguments.
    """
    payload = trigger.payload_map()
    phase: str = state.phase
    bindings: Sequence[Binding] = state.bindings

    evaluations: list[BindingEvaluation] = []
    effects: list[CommandEffect | TransitionEffect] = []

    for binding in bindings:
        if not _source_matches(binding.source, trigger.source):
            continue

        notes: list[str] = []
        passed = True
        if binding.guard is not None:
            try:
                passed = all(
                    _atom_holds(a.fieldname, a.op, a.value, payload, phase)
                    for a in binding.guard.atoms
                )
            except _GuardFieldMissing as miss:
                notes.append(f"guard_field_missing:{miss.fieldname}")
                passed = False

        if passed:
            for action in binding.actions:
                if action.kind == "transition_phase":
                    effects.append(TransitionEffect(action.target_phase or "", binding.binding_id))
                else:
                    try:
                        args = resolve_args(action.args_map(), payload, trigger.actor, trigger.actor_role)
                    except ArgResolutionFailed as fail:
                        notes.append(f"arg_resolution_failed:{action.command_name}:{fail.path}")
                        continue
                    effects.append(
                        CommandEffect(
                            slot_id=action.slot_id or "",
                            command_name=action.command_name or "",
                            args=tuple(sorted(args.items())),
                            binding_id=binding.binding_id,
                        )
                    )

        evaluations.append(BindingEvaluation(binding.binding_id, passed, tuple(notes)))

    return EffectList(tuple(evaluations), tuple(effects))


# ── static cascade analysis ──────────────────────────────────────────


def trigger_key(t: Trigger) -> str:
    if t.kind == "tool_event":
        return f"event:{t.slot_id}/{t.event_name}"
    return f"phase:{t.phase}"


@dataclass(frozen=True)
class CascadeGraph:
    """Over-approximated firing graph: nodes are triggers, an edge means a
    binding on the source trigger can cause the target trigger."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    cycles: tuple[tuple[str, ...], ...]

    @property
    def has_cycles(self) -> bool:
        return bool(self.cycles)

    def to_obj(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [[a, b] for a, b in self.edges],
            "cycles": [list(c) for c in self.cycles],
        }


def _normalize_cycle(cycle: Sequence[str]) -> tuple[str, ...]:
    # rotate so the lexicographically smallest node leads; stable across runs
    pivot = min(range(len(cycle)), key=lambda i: cycle[i])
    return tuple(cycle[pivot:]) + tuple(cycle[:pivot])


def static_cascade_report(
    definition: ActivityDefinition,
    descriptors: Mapping[str, ToolDescriptor] | None = None,
) -> CascadeGraph:
    """Design-time reachability over bindings, guards ignored.

    Edges:
      - a binding with a transition action links its source to the entered
        phase's trigger;
      - a binding with a command action links its source to every event of
        the command's tool that some other binding consumes (commands may
        make a tool emit any of its declared events).

    The runtime depth limit remains the actual safety net; this report
    over-approximates what it can hit.
    """
    consumed: dict[str, Trigger] = {}
    for b in definition.bindings:
        consumed[trigger_key(b.source)] = b.source

    graph = nx.DiGraph()
    for key in consumed:
        graph.add_node(key)

    for b in definition.bindings:
        src = trigger_key(b.source)
        for action in b.actions:
            if action.kind == "transition_phase":
                dst = trigger_key(Trigger.phase_entered(action.target_phase or ""))
                graph.add_edge(src, dst)
            elif action.kind == "invoke_command" and descriptors is not None:
                desc = descriptors.get(action.slot_id or "")
                if desc is None:
                    continue
                declared = [e.name for e in desc.events] + [TOOL_FAILED_EVENT]
                for name in declared:
                    dst = trigger_key(Trigger.tool_event(action.slot_id or "", name))
                    if dst in consumed:
                        graph.add_edge(src, dst)

    cycles = sorted(_normalize_cycle(c) for c in nx.simple_cycles(graph))
    return CascadeGraph(
        nodes=tuple(sorted(graph.nodes)),
        edges=tuple(sorted(graph.edges)),
        cycles=tuple(cycles),
    )
