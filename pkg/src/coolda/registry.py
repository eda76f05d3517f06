"""Fetching and discovering tools published on plain HTTP servers.

A tool artifact is a Python source module exposing a module-level
``create_tool()`` returning a factory that satisfies the plugin contract.
Nothing is deposited anywhere: discovery needs only the artifact bytes and
the contract, so a URL alone reproduces the descriptor.

The synthetic ``local:<tool_id>`` scheme lets in-process factories stand
in for fetched artifacts; their byte payload is the canonical JSON of the
factory's own description, which keeps hashes stable and meaningful.
"""

from __future__ import annotations

import hashlib
import threading
import time
import types
from dataclasses import dataclass
from urllib.parse import urlparse

import requests

from .errors import (
    DescribeFailed,
    DuplicateToolId,
    EmptyBody,
    HttpStatus,
    NetworkUnreachable,
    NotAPlugin,
)
from .model import ToolDescriptor, canonical_json, descriptor_violations
from .tools.base import RawSurface, ToolFactory, filter_integration_surface

__all__ = [
    "PluginArtifact",
    "ToolRegistry",
    "filter_integration_surface",
    "artifact_digest",
]

FETCH_TIMEOUT = 10.0
LOCAL_SCHEME = "local"
ENTRY_POINT = "create_tool"


def artifact_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class PluginArtifact:
    source_url: str
    data: bytes
    artifact_hash: str
    fetched_at: float

    @classmethod
    def of(cls, source_url: str, data: bytes) -> "PluginArtifact":
        return cls(source_url=source_url, data=data, artifact_hash=artifact_digest(data), fetched_at=time.time())


class ToolRegistry:
    """Resolves tool URLs to artifacts and artifacts to descriptors."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._local: dict[str, ToolFactory] = {}

    # ── in-process tools ─────────────────────────────────────────

    def register_inprocess_tool(self, factory: ToolFactory) -> str:
        """Make a factory resolvable as ``local:<tool_id>``."""
        descriptor, _ = factory.describe()
        problems = descriptor_violations(descriptor)
        if problems:
            raise NotAPlugin("; ".join(f"{v.rule}@{v.path}" for v in problems))
        with self._lock:
            if descriptor.tool_id in self._local:
                raise DuplicateToolId(descriptor.tool_id)
            self._local[descriptor.tool_id] = factory
        return descriptor.tool_id

    def _local_bytes(self, factory: ToolFactory) -> bytes:
        descriptor, raw = factory.describe()
        body = {"descriptor": descriptor.to_obj(), "raw_surface": raw.to_obj()}
        return canonical_json(body).encode("utf-8")

    # ── fetching ─────────────────────────────────────────────────

    def fetch_plugin(self, url: str) -> PluginArtifact:
        """GET the artifact at ``url`` and stamp its content digest."""
        parsed = urlparse(url)
        if parsed.scheme == LOCAL_SCHEME:
            tool_id = parsed.path or parsed.netloc
            with self._lock:
                factory = self._local.get(tool_id)
            if factory is None:
                raise NetworkUnreachable(f"no in-process tool {tool_id!r}")
            return PluginArtifact.of(url, self._local_bytes(factory))

        if parsed.scheme not in ("http", "https"):
            raise NetworkUnreachable(f"unsupported scheme {parsed.scheme!r}")
        try:
            resp = requests.get(url, timeout=FETCH_TIMEOUT)
        except requests.RequestException as exc:
            raise NetworkUnreachable(str(exc)) from exc
        if resp.status_code != 200:
            raise HttpStatus(resp.status_code, url)
        if not resp.content:
            raise EmptyBody(url)
        return PluginArtifact.of(url, resp.content)

    # ── discovery ────────────────────────────────────────────────

    def load_factory(self, artifact: PluginArtifact) -> ToolFactory:
        """Materialize the factory behind an artifact.

        local: artifacts resolve straight back to the registered factory;
        fetched ones are executed as a Python module and must expose the
        ``create_tool`` entry point.
        """
        parsed = urlparse(artifact.source_url)
        if parsed.scheme == LOCAL_SCHEME:
            tool_id = parsed.path or parsed.netloc
            with self._lock:
                factory = self._local.get(tool_id)
            if factory is None:
                raise NotAPlugin(f"in-process tool {tool_id!r} vanished")
            return factory

        module = types.ModuleType(f"coolda_artifact_{artifact.artifact_hash[:12]}")
        try:
            source = artifact.data.decode("utf-8")
            exec(compile(source, artifact.source_url, "exec"), module.__dict__)
        except Exception as exc:  # any load failure means "not a plugin"
            raise NotAPlugin(str(exc)) from exc
        entry = getattr(module, ENTRY_POINT, None)
        if not callable(entry):
            raise NotAPlugin(f"artifact lacks {ENTRY_POINT}()")
        try:
            factory = entry()
        except Exception as exc:
            raise NotAPlugin(f"{ENTRY_POINT}() failed: {exc}") from exc
        if not hasattr(factory, "describe") or not hasattr(factory, "instantiate"):
            raise NotAPlugin("factory does not satisfy the plugin contract")
        return factory

    def describe_tool(self, artifact: PluginArtifact) -> tuple[ToolDescriptor, RawSurface]:
        """Self-description of an artifact, stamped with its content hash."""
        factory = self.load_factory(artifact)
        try:
            descriptor, raw = factory.describe()
        except Exception as exc:
            raise DescribeFailed(str(exc)) from exc
        descriptor = descriptor.with_hash(artifact.artifact_hash)
        problems = descriptor_violations(descriptor)
        if problems:
            raise DescribeFailed("; ".join(f"{v.rule}@{v.path}" for v in problems))
        return descriptor, raw

    def describe_url(self, url: str) -> tuple[ToolDescriptor, RawSurface]:
        return self.describe_tool(self.fetch_plugin(url))

    def resolve_factory(self, url: str) -> tuple[ToolFactory, ToolDescriptor]:
        artifact = self.fetch_plugin(url)
        factory = self.load_factory(artifact)
        descriptor, _ = self.describe_tool(artifact)
        return factory, descriptor
