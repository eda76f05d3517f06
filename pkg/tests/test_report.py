"""Figure rendering: files appear next to the delimited outputs."""

from __future__ import annotations

from coolda import engine, report
from coolda.harness import ScenarioScript, run_scenario
from conftest import SCENARIO_DIR, debate_definition


def test_cascade_graph_figure(tmp_path, registry):
    definition = debate_definition()
    descriptors = {s.slot_id: registry.describe_url(s.tool_url)[0] for s in definition.sub_activities}
    graph = engine.static_cascade_report(definition, descriptors)
    out = report.render_cascade_graph(graph, tmp_path / "cascade.png")
    assert out.is_file() and out.stat().st_size > 1024


def test_cyclic_graph_figure(tmp_path):
    from coolda.model import Action, ActivityDefinition, Binding, Trigger

    definition = ActivityDefinition(
        definition_id="cyclic",
        kind="t",
        phases=("p", "q"),
        initial_phase="p",
        roles=("r",),
        bindings=(
            Binding("a", Trigger.phase_entered("p"), (Action.transition_phase("q"),)),
            Binding("b", Trigger.phase_entered("q"), (Action.transition_phase("p"),)),
        ),
    )
    graph = engine.static_cascade_report(definition)
    assert graph.has_cycles
    out = report.render_cascade_graph(graph, tmp_path / "cyclic.png")
    assert out.is_file() and out.stat().st_size > 1024


def test_trace_timeline_figure(tmp_path):
    run = run_scenario(ScenarioScript.load(SCENARIO_DIR / "debate.json"))
    out = report.render_trace_timeline(run.trace, tmp_path / "timeline.png")
    assert out.is_file() and out.stat().st_size > 1024


def test_empty_trace_timeline(tmp_path):
    run = run_scenario(ScenarioScript.load(SCENARIO_DIR / "empty.json"))
    out = report.render_trace_timeline(run.trace, tmp_path / "empty.png")
    assert out.is_file()
