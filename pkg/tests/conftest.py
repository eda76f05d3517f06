"""Shared fixtures: definitions, registries and a local artifact server."""

from __future__ import annotations

import functools
import http.server
import threading
from pathlib import Path

import pytest

from coolda.model import (
    Action,
    ActivityDefinition,
    Binding,
    Guard,
    GuardAtom,
    RoleMapping,
    SubActivitySlot,
    Trigger,
)
from coolda.registry import ToolRegistry
from coolda.tools import bundled_factories
from coolda.tools.base import BackendHub

ARTIFACT_DIR = Path(__file__).resolve().parents[1] / "src" / "coolda" / "artifacts"
SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


def fresh_registry() -> ToolRegistry:
    registry = ToolRegistry()
    for factory in bundled_factories(BackendHub()):
        registry.register_inprocess_tool(factory)
    return registry


@pytest.fixture
def registry() -> ToolRegistry:
    return fresh_registry()


def debate_definition() -> ActivityDefinition:
    return ActivityDefinition(
        definition_id="debate",
        kind="debate",
        phases=("open", "motion-pending", "closed"),
        initial_phase="open",
        roles=("moderator", "debater"),
        sub_activities=(
            SubActivitySlot("vote-slot", "local:vote"),
            SubActivitySlot("forum-slot", "local:forum"),
        ),
        role_mappings=(
            RoleMapping("moderator", "vote-slot", "chair"),
            RoleMapping("moderator", "forum-slot", "moderator"),
            RoleMapping("debater", "vote-slot", "voter"),
        ),
        bindings=(
            Binding(
                binding_id="motion-pauses-forum",
                source=Trigger.tool_event("vote-slot", "motion_proposed"),
                guard=Guard((GuardAtom("$phase", "=", "open"),)),
                actions=(
                    Action.transition_phase("motion-pending"),
                    Action.invoke_command("forum-slot", "ia_stop_discussion", {}),
                ),
            ),
        ),
    )


def course_definition() -> ActivityDefinition:
    return ActivityDefinition(
        definition_id="course",
        kind="distance-teaching",
        phases=("lecture",),
        initial_phase="lecture",
        roles=("professor", "student"),
        sub_activities=(
            SubActivitySlot("doc-share", "local:doc-share"),
            SubActivitySlot("chat", "local:chat"),
        ),
        role_mappings=(
            RoleMapping("professor", "doc-share", "presenter"),
            RoleMapping("professor", "chat", "orator"),
            RoleMapping("student", "doc-share", "viewer"),
        ),
    )


@pytest.fixture
def debate_def() -> ActivityDefinition:
    return debate_definition()


@pytest.fixture
def course_def() -> ActivityDefinition:
    return course_definition()


class _QuietFiles(http.server.SimpleHTTPRequestHandler):
    def log_message(self, fmt, *args):
        pass


class ArtifactServer:
    """Plain static HTTP server over a directory, like `coolda serve-tools`."""

    def __init__(self, directory: Path):
        handler = functools.partial(_QuietFiles, directory=str(directory))
        self.httpd = http.server.ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self.httpd.daemon_threads = True
        self.port = self.httpd.server_address[1]
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def url(self, name: str) -> str:
        return f"http://127.0.0.1:{self.port}/{name}"

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture(scope="session")
def artifact_server():
    server = ArtifactServer(ARTIFACT_DIR)
    yield server
    server.stop()


@pytest.fixture(scope="session")
def scratch_artifact_server(tmp_path_factory):
    """Artifact server over a scratch directory tests may write to."""
    root = tmp_path_factory.mktemp("artifacts")
    (root / "empty.bin").write_bytes(b"")
    (root / "noise.bin").write_bytes(bytes(range(256)) * 4)
    (root / "nofactory.py").write_text("x = 1\n")
    server = ArtifactServer(root)
    yield server
    server.stop()
