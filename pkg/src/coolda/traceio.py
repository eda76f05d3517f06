"""Trace files and trace comparison.

A trace file is JSON lines: a meta record first (instance id plus the full
definition, so a trace is replayable on its own), then one canonical-JSON
line per entry.

Comparison ignores wall-clock timestamps and generated uuids: every
uuid-shaped string is rewritten to a placeholder numbered by first
appearance, in both traces independently, before entries are compared.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, TextIO

from .model import ActivityDefinition, Trace, TraceEntry, canonical_json

UUID_RE = re.compile(r"^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$")


@dataclass(frozen=True)
class TraceMeta:
    instance_id: str
    definition: ActivityDefinition

    def to_obj(self) -> dict:
        return {"trace_meta": {"instance_id": self.instance_id, "definition": self.definition.to_obj()}}


def write_trace(out: TextIO, meta: TraceMeta, entries: Iterable[TraceEntry]) -> None:
    out.write(canonical_json(meta.to_obj()) + "\n")
    for entry in entries:
        out.write(canonical_json(entry.to_obj()) + "\n")


def write_trace_file(path: str | Path, meta: TraceMeta, trace: Trace) -> None:
    with open(path, "w", encoding="utf-8") as out:
        write_trace(out, meta, trace.entries)


def read_trace_file(path: str | Path) -> tuple[TraceMeta, Trace]:
    with open(path, encoding="utf-8") as src:
        lines = [line for line in (l.strip() for l in src) if line]
    if not lines:
        raise ValueError(f"empty trace file: {path}")
    head = json.loads(lines[0])
    if "trace_meta" not in head:
        raise ValueError(f"trace file lacks meta record: {path}")
    meta = TraceMeta(
        instance_id=head["trace_meta"]["instance_id"],
        definition=ActivityDefinition.from_obj(head["trace_meta"]["definition"]),
    )
    entries = [TraceEntry.from_obj(json.loads(line)) for line in lines[1:]]
    return meta, Trace(instance_id=meta.instance_id, entries=entries)


# ── normalization and diffing ────────────────────────────────────────


class _IdNormalizer:
    def __init__(self) -> None:
        self._seen: dict[str, str] = {}

    def norm(self, value: Any) -> Any:
        if isinstance(value, str) and UUID_RE.match(value):
            if value not in self._seen:
                self._seen[value] = f"u{len(self._seen)}"
            return self._seen[value]
        if isinstance(value, dict):
            return {k: self.norm(v) for k, v in value.items() if k != "ts"}
        if isinstance(value, list):
            return [self.norm(v) for v in value]
        return value


def normalized_entries(trace: Trace) -> list[dict]:
    normalizer = _IdNormalizer()
    return [normalizer.norm(entry.to_obj()) for entry in trace.entries]


@dataclass
class TraceDiff:
    mismatches: list[tuple[int, dict | None, dict | None]] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.mismatches

    def describe(self, limit: int = 5) -> str:
        if self.empty:
            return "traces equal"
        lines = [f"{len(self.mismatches)} differing entries"]
        for i, a, b in self.mismatches[:limit]:
            lines.append(f"  [{i}] a={canonical_json(a) if a else None}")
            lines.append(f"      b={canonical_json(b) if b else None}")
        return "\n".join(lines)


def compare_traces(a: Trace, b: Trace) -> TraceDiff:
    """Structural diff modulo timestamps and generated ids."""
    na, nb = normalized_entries(a), normalized_entries(b)
    diff = TraceDiff()
    for i in range(max(len(na), len(nb))):
        ea = na[i] if i < len(na) else None
        eb = nb[i] if i < len(nb) else None
        if ea != eb:
            diff.mismatches.append((i, ea, eb))
    return diff
