"""Bundled example tools exercising the plugin contract."""

from __future__ import annotations

from .base import HUB, BackendHub, RawSurface, RoleRef, ToolFactory, ToolInstance, UserRef
from .chat import ChatToolFactory
from .docshare import DocShareToolFactory
from .forum import ForumToolFactory
from .vote import VoteToolFactory

__all__ = [
    "HUB",
    "BackendHub",
    "RawSurface",
    "RoleRef",
    "ToolFactory",
    "ToolInstance",
    "UserRef",
    "VoteToolFactory",
    "ForumToolFactory",
    "ChatToolFactory",
    "DocShareToolFactory",
    "bundled_factories",
]


def bundled_factories(hub: BackendHub = HUB) -> list[ToolFactory]:
    return [VoteToolFactory(hub), ForumToolFactory(hub), ChatToolFactory(hub), DocShareToolFactory(hub)]
