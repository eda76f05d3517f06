"""coolda: dynamic integration and articulation of cooperative tools.

Tools published on plain HTTP servers are fetched, introspected and
instantiated in a client-side host; bindings route events from one
activity into phase changes and commands in its siblings, with roles
propagated from the parent activity into its sub-activities.
"""

from __future__ import annotations

from .engine import evaluate, resolve_args, static_cascade_report
from .harness import ScenarioScript, compare_traces, replay_check, run_scenario
from .host import ToolHost, ToolInstanceRef
from .model import (
    Action,
    ActivityDefinition,
    Binding,
    Command,
    EventSignature,
    Guard,
    GuardAtom,
    InterActivityEvent,
    OperationSignature,
    RoleMapping,
    SubActivitySlot,
    ToolDescriptor,
    Trace,
    TraceEntry,
    Trigger,
    Violation,
    map_roles,
    validate_activity_definition,
)
from .registry import PluginArtifact, ToolRegistry, filter_integration_surface
from .server import ActivityServer, ActivityState, DispatchOutcome, JoinGrant
from .service import ActivityService

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActivityDefinition",
    "ActivityServer",
    "ActivityService",
    "ActivityState",
    "Binding",
    "Command",
    "DispatchOutcome",
    "EventSignature",
    "Guard",
    "GuardAtom",
    "InterActivityEvent",
    "JoinGrant",
    "OperationSignature",
    "PluginArtifact",
    "RoleMapping",
    "ScenarioScript",
    "SubActivitySlot",
    "ToolDescriptor",
    "ToolHost",
    "ToolInstanceRef",
    "ToolRegistry",
    "Trace",
    "TraceEntry",
    "Trigger",
    "Violation",
    "compare_traces",
    "evaluate",
    "filter_integration_surface",
    "map_roles",
    "replay_check",
    "resolve_args",
    "run_scenario",
    "static_cascade_report",
    "validate_activity_definition",
    "__version__",
]
