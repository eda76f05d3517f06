"""Exception types raised across the platform.

Tool-level rejections (a poll that is closed, an unknown user) derive from
ToolError so hosts can map them to command completions without knowing
each tool's vocabulary.
"""

from __future__ import annotations

from .model import Violation


class CooldaError(Exception):
    """Base class for platform errors."""


# ── registry / fetching ──────────────────────────────────────────────


class NetworkUnreachable(CooldaError):
    pass


class HttpStatus(CooldaError):
    def __init__(self, code: int, url: str = ""):
        super().__init__(f"HTTP {code} fetching {url}")
        self.code = code
        self.url = url


class EmptyBody(CooldaError):
    pass


class NotAPlugin(CooldaError):
    pass


class DescribeFailed(CooldaError):
    pass


class DuplicateToolId(CooldaError):
    pass


# ── host / tools ─────────────────────────────────────────────────────


class InstantiationFailed(CooldaError):
    pass


class UnknownRole(CooldaError):
    pass


class ToolUnavailable(CooldaError):
    pass


class CommandRejected(CooldaError):
    """A tool refused a command for a tool-level reason."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class ArgTypeMismatch(CooldaError):
    pass


class UnknownCommand(CooldaError):
    pass


class ToolError(CooldaError):
    """Base for errors a tool raises from its own domain."""


# ── activity server ──────────────────────────────────────────────────


class UnknownInstance(CooldaError):
    pass


class UnknownSlot(CooldaError):
    pass


class UnknownPhase(CooldaError):
    pass


class AlreadyJoined(CooldaError):
    pass


class UnknownBinding(CooldaError):
    pass


class MalformedEvent(CooldaError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class _ViolationsError(CooldaError):
    def __init__(self, violations: list[Violation]):
        summary = "; ".join(f"{v.rule}@{v.path}" for v in violations) or "invalid"
        super().__init__(summary)
        self.violations = violations


class InvalidDefinition(_ViolationsError):
    pass


class InvalidBinding(_ViolationsError):
    pass


# ── scenario harness ─────────────────────────────────────────────────


class ScenarioTimeout(CooldaError):
    pass


class ExpectFailed(CooldaError):
    pass
