"""Shared-document tool: one document everybody sees alike, edited by a
single presenter.

Protocol style: revision push. The backend versions the document and
pushes (revision, presenter, content) tuples; clients apply whichever
revision is newest. Edits by anyone but the presenter are refused.
"""

from __future__ import annotations

from typing import Any

from ..errors import ToolError
from ..model import EventSignature
from .base import HUB, ToolFactory, UserRef


class UnknownUser(ToolError):
    pass


class NotPresenter(ToolError):
    pass


class DocShareBackend:
    def __init__(self) -> None:
        self.revision = 0
        self.content = ""
        self.presenter: str | None = None
        self.users: dict[str, Any] = {}

    def attach(self, user: str, client: Any) -> None:
        self.users[user] = client
        client._on_revision(self.revision, self.presenter, self.content)

    def detach(self, user: str) -> None:
        self.users.pop(user, None)

    def _push(self) -> None:
        for c in list(self.users.values()):
            c._on_revision(self.revision, self.presenter, self.content)

    def edit(self, user: str, content: str) -> int:
        if self.presenter is not None and user != self.presenter:
            raise NotPresenter(user)
        self.revision += 1
        self.content = content
        self._push()
        return self.revision

    def set_presenter(self, user: str) -> None:
        if user not in self.users:
            raise UnknownUser(user)
        self.presenter = user
        self._push()

    def seed_presenter(self, user: str) -> None:
        self.presenter = user


class DocShareClient:
    def __init__(self, backend: DocShareBackend, user: str):
        self._backend = backend
        self._user = user
        self._revision = 0
        self._presenter: str | None = None
        self._content = ""
        self._emit = lambda *a, **k: None
        backend.attach(user, self)

    def _on_revision(self, revision: int, presenter: str | None, content: str) -> None:
        if revision >= self._revision:
            self._revision = revision
            self._presenter = presenter
            self._content = content

    def _close(self) -> None:
        self._backend.detach(self._user)

    # integration surface
    def ia_set_presenter(self, user: UserRef) -> None:
        self._backend.set_presenter(user)
        self._emit("presenter_changed", {"presenter": user}, None)

    # user-level operations
    def edit_document(self, content: str) -> int:
        return self._backend.edit(self._user, content)

    def read_document(self) -> dict:
        return {"revision": self._revision, "content": self._content}

    def public_state(self) -> dict:
        return {"presenter": self._presenter, "revision": self._revision}


class DocShareToolFactory(ToolFactory):
    tool_id = "doc-share"
    activity_kind = "document-sharing"
    roles = ("presenter", "viewer")
    events = (EventSignature("presenter_changed", (("presenter", "user-ref"),)),)
    client_class = DocShareClient

    def __init__(self, hub=HUB):
        self._hub = hub

    def make_client(self, params: dict, assigned_role: str | None) -> DocShareClient:
        backend = self._hub.get_or_create(
            params.get("$instance", "-"), params.get("$slot", "-"), DocShareBackend
        )
        user = params.get("$user", "anonymous")
        if assigned_role == "presenter":
            backend.seed_presenter(user)
        return DocShareClient(backend, user)
