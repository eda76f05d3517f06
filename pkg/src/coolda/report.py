"""Figure rendering for the report paths of the CLI.

Two figures, both written next to the delimited outputs: the static
cascade graph of a definition (cycle edges drawn red) and a timeline of a
recorded trace (one lane per entry kind, markers in trace order, phase
changes annotated).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import networkx as nx

from .engine import CascadeGraph
from .model import Trace, TRACE_KINDS

_KIND_COLORS = {
    "EventReceived": "#1f77b4",
    "GuardEvaluated": "#7f7f7f",
    "CommandDispatched": "#2ca02c",
    "CommandCompleted": "#98df8a",
    "PhaseChanged": "#d62728",
    "BindingAdded": "#9467bd",
    "BindingRemoved": "#c5b0d5",
    "ParticipantJoined": "#ff7f0e",
    "Error": "#e377c2",
}


def render_cascade_graph(graph: CascadeGraph, path: str | Path, title: str = "cascade graph") -> Path:
    g = nx.DiGraph()
    g.add_nodes_from(graph.nodes)
    g.add_edges_from(graph.edges)

    cycle_edges = set()
    for cycle in graph.cycles:
        for i, node in enumerate(cycle):
            cycle_edges.add((node, cycle[(i + 1) % len(cycle)]))

    fig, ax = plt.subplots(figsize=(max(6, len(graph.nodes) * 1.4), 5))
    pos = nx.circular_layout(g) if len(g) > 1 else {n: (0, 0) for n in g}
    nx.draw_networkx_nodes(g, pos, ax=ax, node_color="#dbe9f6", node_size=1600, edgecolors="#1f77b4")
    nx.draw_networkx_labels(g, pos, ax=ax, font_size=7)
    normal = [e for e in g.edges if e not in cycle_edges]
    nx.draw_networkx_edges(g, pos, ax=ax, edgelist=normal, edge_color="#555555", arrows=True, arrowsize=14)
    if cycle_edges:
        nx.draw_networkx_edges(
            g, pos, ax=ax, edgelist=sorted(cycle_edges & set(g.edges)), edge_color="#d62728", width=2.0, arrows=True, arrowsize=14
        )
    ax.set_title(f"{title} — {len(graph.cycles)} cycle(s)")
    ax.set_axis_off()
    out = Path(path)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_trace_timeline(trace: Trace, path: str | Path, title: str = "trace timeline") -> Path:
    lanes = {kind: i for i, kind in enumerate(TRACE_KINDS)}
    fig, ax = plt.subplots(figsize=(max(7, len(trace.entries) * 0.25), 4.5))

    for entry in trace.entries:
        y = lanes.get(entry.kind, len(lanes))
        ax.scatter(entry.idx, y, color=_KIND_COLORS.get(entry.kind, "#000000"), s=36, zorder=3)
        if entry.kind == "PhaseChanged":
            data = entry.data_map()
            ax.annotate(
                f"{data.get('from')}→{data.get('to')}",
                (entry.idx, y),
                textcoords="offset points",
                xytext=(0, 8),
                fontsize=6,
                ha="center",
            )

    ax.set_yticks(list(lanes.values()))
    ax.set_yticklabels(list(lanes.keys()), fontsize=7)
    ax.set_xlabel("trace index")
    seqs = [e.seq for e in trace.entries]
    if seqs:
        ax.set_xlim(-1, max(e.idx for e in trace.entries) + 1)
    ax.grid(axis="x", color="#eeeeee", zorder=0)
    ax.set_title(f"{title} — {len(trace.entries)} entries, seq ≤ {max(seqs) if seqs else 0}")
    out = Path(path)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
