"""Chat tool: synchronous messaging with floor control.

The floor stands in for speaking rights: granting it to the orator is how
a parent activity parameterizes who talks. Protocol style: broadcast
fan-out, every operation is rebroadcast verbatim to all connected clients
including the sender.
"""

from __future__ import annotations

from typing import Any

from ..errors import ToolError
from ..model import EventSignature
from .base import HUB, ToolFactory, UserRef


class UnknownUser(ToolError):
    pass


class ChatBackend:
    def __init__(self) -> None:
        self.users: dict[str, Any] = {}
        self.log: list[tuple[str, str]] = []
        self.floor_holder: str | None = None

    def attach(self, user: str, client: Any) -> None:
        self.users[user] = client
        self._broadcast({"kind": "roster", "users": sorted(self.users), "floor": self.floor_holder})

    def detach(self, user: str) -> None:
        self.users.pop(user, None)

    def _broadcast(self, msg: dict) -> None:
        for c in list(self.users.values()):
            c._on_broadcast(msg)

    def send(self, user: str, text: str) -> None:
        self.log.append((user, text))
        self._broadcast({"kind": "message", "user": user, "text": text})

    def grant_floor(self, user: str) -> None:
        if user not in self.users:
            raise UnknownUser(user)
        self.floor_holder = user
        self._broadcast({"kind": "floor", "holder": user})

    def seed_floor(self, user: str) -> None:
        # startup parameterization: no broadcast storm, just state
        self.floor_holder = user


class ChatClient:
    def __init__(self, backend: ChatBackend, user: str):
        self._backend = backend
        self._user = user
        self._messages: list[tuple[str, str]] = list(backend.log)
        self._floor: str | None = backend.floor_holder
        self._emit = lambda *a, **k: None
        backend.attach(user, self)

    def _on_broadcast(self, msg: dict) -> None:
        if msg["kind"] == "message":
            self._messages.append((msg["user"], msg["text"]))
        elif msg["kind"] == "floor":
            self._floor = msg["holder"]
        elif msg["kind"] == "roster":
            self._floor = msg["floor"]

    def _close(self) -> None:
        self._backend.detach(self._user)

    # integration surface
    def ia_grant_floor(self, user: UserRef) -> None:
        self._backend.grant_floor(user)
        self._emit("floor_changed", {"holder": user}, None)

    # user-level operations
    def send_message(self, text: str) -> None:
        self._backend.send(self._user, text)

    def public_state(self) -> dict:
        return {"floor": self._floor, "message_count": len(self._messages)}


class ChatToolFactory(ToolFactory):
    tool_id = "chat"
    activity_kind = "synchronous-messaging"
    roles = ("orator", "listener")
    events = (EventSignature("floor_changed", (("holder", "user-ref"),)),)
    client_class = ChatClient

    def __init__(self, hub=HUB):
        self._hub = hub

    def make_client(self, params: dict, assigned_role: str | None) -> ChatClient:
        backend = self._hub.get_or_create(
            params.get("$instance", "-"), params.get("$slot", "-"), ChatBackend
        )
        user = params.get("$user", "anonymous")
        if assigned_role == "orator":
            backend.seed_floor(user)
        client = ChatClient(backend, user)
        return client
