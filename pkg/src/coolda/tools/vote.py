"""Vote tool: polls over motions, decided by simple majority.

Protocol style: state-sync snapshots. Every mutation makes the backend
push a full copy of the poll table to all connected clients; clients never
hold partial diffs. The platform sees none of this traffic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..errors import ToolError
from ..model import EventSignature
from .base import HUB, ToolFactory


class UnknownPoll(ToolError):
    pass


class PollClosed(ToolError):
    pass


@dataclass
class Poll:
    motion: str
    open: bool = True
    tally: dict[str, str] = field(default_factory=dict)
    outcome: str | None = None


def majority_outcome(choices: list[str]) -> str:
    """Most frequent choice, or "tie" when the lead is shared."""
    if not choices:
        return "tie"
    counts: dict[str, int] = {}
    for c in choices:
        counts[c] = counts.get(c, 0) + 1
    best = max(counts.values())
    leaders = [c for c, n in counts.items() if n == best]
    return leaders[0] if len(leaders) == 1 else "tie"


class VoteBackend:
    def __init__(self) -> None:
        self.polls: dict[str, Poll] = {}
        self._next = 0
        self._clients: list[Any] = []

    def attach(self, client: Any) -> None:
        self._clients.append(client)
        client._on_snapshot(self._snapshot())

    def detach(self, client: Any) -> None:
        if client in self._clients:
            self._clients.remove(client)

    def _snapshot(self) -> dict:
        return {
            pid: {"motion": p.motion, "open": p.open, "tally": dict(p.tally), "outcome": p.outcome}
            for pid, p in self.polls.items()
        }

    def _sync(self) -> None:
        snap = self._snapshot()
        for c in list(self._clients):
            c._on_snapshot(snap)

    def open_poll(self, motion: str) -> str:
        self._next += 1
        pid = f"p{self._next}"
        self.polls[pid] = Poll(motion=motion)
        self._sync()
        return pid

    def _poll(self, poll_id: str) -> Poll:
        if poll_id not in self.polls:
            raise UnknownPoll(poll_id)
        return self.polls[poll_id]

    def close_poll(self, poll_id: str) -> None:
        self._poll(poll_id).open = False
        self._sync()

    def cast(self, user: str, poll_id: str, choice: str) -> None:
        poll = self._poll(poll_id)
        if not poll.open:
            raise PollClosed(poll_id)
        poll.tally[user] = choice
        self._sync()

    def decide(self, poll_id: str) -> str:
        poll = self._poll(poll_id)
        poll.outcome = majority_outcome(list(poll.tally.values()))
        poll.open = False
        self._sync()
        return poll.outcome


class VoteClient:
    def __init__(self, backend: VoteBackend, user: str):
        self._backend = backend
        self._user = user
        self._polls: dict = {}
        self._emit = lambda *a, **k: None
        backend.attach(self)

    def _on_snapshot(self, snapshot: dict) -> None:
        self._polls = snapshot

    def _close(self) -> None:
        self._backend.detach(self)

    # integration surface
    def ia_open_poll(self, motion: str) -> str:
        return self._backend.open_poll(motion)

    def ia_close_poll(self, poll_id: str) -> None:
        self._backend.close_poll(poll_id)

    # user-level operations
    def propose_motion(self, motion: str) -> str:
        poll_id = self._backend.open_poll(motion)
        self._emit(
            "motion_proposed",
            {"motion_id": poll_id, "motion": motion, "actor": self._user},
            self._user,
        )
        return poll_id

    def cast_vote(self, poll_id: str, choice: str) -> None:
        self._backend.cast(self._user, poll_id, choice)

    def decide_motion(self, poll_id: str) -> str:
        outcome = self._backend.decide(poll_id)
        self._emit("motion_decided", {"motion_id": poll_id, "outcome": outcome}, self._user)
        return outcome

    def public_state(self) -> dict:
        return {
            "open_polls": sorted(pid for pid, p in self._polls.items() if p["open"]),
            "outcomes": {pid: p["outcome"] for pid, p in self._polls.items() if p["outcome"]},
        }


class VoteToolFactory(ToolFactory):
    tool_id = "vote"
    activity_kind = "decision"
    roles = ("chair", "voter")
    events = (
        EventSignature(
            "motion_proposed",
            (("actor", "user-ref"), ("motion", "string"), ("motion_id", "string")),
        ),
        EventSignature(
            "motion_decided",
            (("motion_id", "string"), ("outcome", "string")),
        ),
    )
    client_class = VoteClient

    def __init__(self, hub=HUB):
        self._hub = hub

    def make_client(self, params: dict, assigned_role: str | None) -> VoteClient:
        backend = self._hub.get_or_create(
            params.get("$instance", "-"), params.get("$slot", "-"), VoteBackend
        )
        return VoteClient(backend, params.get("$user", "anonymous"))
