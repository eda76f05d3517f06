"""Plugin contract and the introspection that powers tool discovery.

A tool ships as a factory object. Discovery never needs a running tool
instance: the factory carries identity fields and a client class whose
public methods are enumerated by reflection to produce the raw operation
surface; the naming convention then filters the integration commands.

Tools keep full protocol freedom between their own clients and backends;
the platform only ever touches the contract methods below and the event
sink. Client methods declare parameter semantics through plain Python
annotations (str/int/bool/dict plus the UserRef/RoleRef markers).
"""

from __future__ import annotations

import inspect
import threading
from typing import Any, Callable

from ..errors import UnknownCommand, UnknownRole
from ..model import (
    COMMAND_NAME_RE,
    EventSignature,
    OperationSignature,
    ToolDescriptor,
)

__all__ = [
    "UserRef",
    "RoleRef",
    "EventSink",
    "RawSurface",
    "ToolInstance",
    "ToolFactory",
    "BackendHub",
    "operations_of",
    "filter_integration_surface",
]


class UserRef(str):
    """Annotation marker: a parameter naming a user."""


class RoleRef(str):
    """Annotation marker: a parameter naming a role."""


# An event sink receives (event_name, payload, actor-or-None).
EventSink = Callable[[str, dict, "str | None"], None]

_ANNOTATION_TAGS = {
    str: "string",
    int: "integer",
    bool: "boolean",
    dict: "json",
    UserRef: "user-ref",
    RoleRef: "role-ref",
}


def _tag_for(annotation: Any) -> str:
    return _ANNOTATION_TAGS.get(annotation, "json")


def operations_of(client_class: type) -> tuple[OperationSignature, ...]:
    """Reflect a client class into its full (unfiltered) operation list."""
    ops = []
    for name, member in inspect.getmembers(client_class, predicate=inspect.isfunction):
        if name.startswith("_"):
            continue
        # eval_str resolves postponed (stringified) annotations to classes
        sig = inspect.signature(member, eval_str=True)
        params = tuple(
            (pname, _tag_for(p.annotation))
            for pname, p in sig.parameters.items()
            if pname != "self"
        )
        returns = "void"
        if sig.return_annotation not in (inspect.Signature.empty, None):
            returns = _tag_for(sig.return_annotation)
        ops.append(OperationSignature(name=name, params=params, returns=returns))
    return tuple(sorted(ops, key=lambda o: o.name))


def filter_integration_surface(
    operations: tuple[OperationSignature, ...],
) -> tuple[tuple[OperationSignature, ...], tuple[OperationSignature, ...]]:
    """Split operations into (integration commands, rejected), preserving order."""
    commands = tuple(o for o in operations if COMMAND_NAME_RE.match(o.name))
    rejected = tuple(o for o in operations if not COMMAND_NAME_RE.match(o.name))
    return commands, rejected


class RawSurface:
    """The unfiltered introspection result of a tool."""

    def __init__(self, all_operations: tuple[OperationSignature, ...], declared_events: tuple[EventSignature, ...]):
        self.all_operations = all_operations
        self.declared_events = declared_events

    def to_obj(self) -> dict:
        return {
            "all_operations": [o.to_obj() for o in self.all_operations],
            "declared_events": [e.to_obj() for e in self.declared_events],
        }


class ToolInstance:
    """A live tool client bound to one user in one activity instance.

    Subclasses hold the tool-specific client; this wrapper owns the sink
    plumbing and the command dispatch the host relies on.
    """

    def __init__(self, client: Any):
        self.client = client
        self._sink: EventSink | None = None
        self._alive = True
        client._emit = self._emit  # clients call self._emit(name, payload, actor)

    def _emit(self, event_name: str, payload: dict, actor: str | None = None) -> None:
        if self._sink is not None and self._alive:
            self._sink(event_name, payload, actor)

    def subscribe(self, sink: EventSink) -> None:
        self._sink = sink

    def invoke(self, command_name: str, args: dict) -> Any:
        method = getattr(self.client, command_name, None)
        if method is None or not COMMAND_NAME_RE.match(command_name):
            raise UnknownCommand(command_name)
        return method(**args)

    def user_action(self, op: str, args: dict) -> Any:
        """Drive an ordinary user-level operation of the client."""
        method = getattr(self.client, op, None)
        if method is None or op.startswith("_"):
            raise UnknownCommand(op)
        return method(**args)

    def public_state(self) -> dict:
        return self.client.public_state()

    def shutdown(self) -> None:
        self._alive = False
        self._sink = None
        close = getattr(self.client, "_close", None)
        if close is not None:
            close()


class ToolFactory:
    """Base for tool factories: identity + introspective description.

    Subclasses set the class attributes and implement
    :meth:`make_client`. ``instance_params`` carries the reserved keys
    ``$instance``, ``$slot`` and ``$user`` injected by the host next to the
    slot's own parameters.
    """

    tool_id: str = ""
    version: str = "1.0.0"
    activity_kind: str = ""
    roles: tuple[str, ...] = ()
    events: tuple[EventSignature, ...] = ()
    client_class: type = object

    def raw_surface(self) -> RawSurface:
        return RawSurface(operations_of(self.client_class), self.events)

    def describe(self) -> tuple[ToolDescriptor, RawSurface]:
        raw = self.raw_surface()
        commands, _rejected = filter_integration_surface(raw.all_operations)
        descriptor = ToolDescriptor(
            tool_id=self.tool_id,
            version=self.version,
            activity_kind=self.activity_kind,
            commands=commands,
            events=self.events,
            roles=self.roles,
        )
        return descriptor, raw

    def make_client(self, params: dict, assigned_role: str | None) -> Any:
        raise NotImplementedError

    def instantiate(self, instance_params: dict, assigned_role: str | None) -> ToolInstance:
        if assigned_role is not None and assigned_role not in self.roles:
            raise UnknownRole(assigned_role)
        client = self.make_client(dict(instance_params), assigned_role)
        return ToolInstance(client)


class BackendHub:
    """Process-wide registry of tool backends, keyed per activity slot.

    Each (instance_id, slot_id) pair gets one backend shared by every
    client of that slot, which is what lets a tool's own protocol keep its
    clients convergent. Instance ids are unique, so activity instances are
    isolated by construction.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._backends: dict[tuple[str, str], Any] = {}

    def get_or_create(self, instance_id: str, slot_id: str, make: Callable[[], Any]) -> Any:
        with self._lock:
            key = (instance_id, slot_id)
            if key not in self._backends:
                self._backends[key] = make()
            return self._backends[key]

    def find(self, instance_id: str, slot_id: str) -> Any | None:
        with self._lock:
            return self._backends.get((instance_id, slot_id))

    def backends_for(self, instance_id: str) -> dict[str, Any]:
        with self._lock:
            return {slot: b for (iid, slot), b in self._backends.items() if iid == instance_id}

    def reset(self) -> None:
        with self._lock:
            self._backends.clear()


# Default hub shared by all bundled tools in this process.
HUB = BackendHub()
