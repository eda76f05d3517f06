"""Forum tool: threaded message board whose discussions can be closed.

Protocol style: request/response. Clients send request objects to the
backend and get a reply; the backend additionally pushes replication
notices so every client mirrors the accepting flag and the message log.
Stopping twice changes nothing and emits nothing the second time.
"""

from __future__ import annotations

from typing import Any

from ..errors import ToolError
from ..model import EventSignature
from .base import HUB, ToolFactory


class PostingClosed(ToolError):
    pass


class ForumBackend:
    def __init__(self) -> None:
        self.accepting = True
        self.messages: list[tuple[str, str]] = []  # (author, text)
        self._clients: list[Any] = []

    def attach(self, client: Any) -> None:
        self._clients.append(client)
        client._on_notice({"kind": "state", "accepting": self.accepting, "messages": list(self.messages)})

    def detach(self, client: Any) -> None:
        if client in self._clients:
            self._clients.remove(client)

    def _replicate(self, notice: dict) -> None:
        for c in list(self._clients):
            c._on_notice(notice)

    def request(self, op: str, **kw: Any) -> Any:
        if op == "post":
            if not self.accepting:
                raise PostingClosed("discussion is closed")
            self.messages.append((kw["user"], kw["text"]))
            self._replicate({"kind": "message", "author": kw["user"], "text": kw["text"]})
            return len(self.messages)
        if op == "stop":
            changed = self.accepting
            self.accepting = False
            if changed:
                self._replicate({"kind": "accepting", "value": False})
            return changed
        if op == "resume":
            changed = not self.accepting
            self.accepting = True
            if changed:
                self._replicate({"kind": "accepting", "value": True})
            return changed
        raise ValueError(f"unknown forum request {op!r}")


class ForumClient:
    def __init__(self, backend: ForumBackend, user: str):
        self._backend = backend
        self._user = user
        self._accepting = True
        self._messages: list[tuple[str, str]] = []
        self._emit = lambda *a, **k: None
        backend.attach(self)

    def _on_notice(self, notice: dict) -> None:
        if notice["kind"] == "state":
            self._accepting = notice["accepting"]
            self._messages = list(notice["messages"])
        elif notice["kind"] == "message":
            self._messages.append((notice["author"], notice["text"]))
        elif notice["kind"] == "accepting":
            self._accepting = notice["value"]

    def _close(self) -> None:
        self._backend.detach(self)

    # integration surface
    def ia_stop_discussion(self) -> None:
        if self._backend.request("stop"):
            self._emit("discussion_stopped", {}, None)

    def ia_resume_discussion(self) -> None:
        self._backend.request("resume")

    # user-level operations
    def post_message(self, text: str) -> int:
        count = self._backend.request("post", user=self._user, text=text)
        self._emit("message_posted", {"author": self._user, "text": text}, self._user)
        return count

    def read_messages(self) -> dict:
        return {"messages": [{"author": a, "text": t} for a, t in self._messages]}

    def public_state(self) -> dict:
        return {
            "accepting": self._accepting,
            "message_count": len(self._messages),
            "messages": [list(m) for m in self._messages],
        }


class ForumToolFactory(ToolFactory):
    tool_id = "forum"
    activity_kind = "discussion"
    roles = ("moderator", "participant")
    events = (
        EventSignature("message_posted", (("author", "user-ref"), ("text", "string"))),
        EventSignature("discussion_stopped", ()),
    )
    client_class = ForumClient

    def __init__(self, hub=HUB):
        self._hub = hub

    def make_client(self, params: dict, assigned_role: str | None) -> ForumClient:
        backend = self._hub.get_or_create(
            params.get("$instance", "-"), params.get("$slot", "-"), ForumBackend
        )
        return ForumClient(backend, params.get("$user", "anonymous"))
