"""Scenario harness: script validation, runs, trace comparison, replay."""

from __future__ import annotations

import json

import pytest

from coolda.harness import (
    ScenarioRuntime,
    ScenarioScript,
    compare_traces,
    replay_check,
    replay_trace,
    run_scenario,
)
from coolda.traceio import read_trace_file
from conftest import SCENARIO_DIR

SCENARIOS = ["debate", "course", "empty"]


def load(name: str) -> ScenarioScript:
    return ScenarioScript.load(SCENARIO_DIR / f"{name}.json")


# ── script validation ────────────────────────────────────────────────


def test_bundled_scripts_validate():
    for name in SCENARIOS:
        assert load(name).validate() == []


def test_ticks_must_not_decrease():
    obj = load("debate").to_obj()
    obj["steps"][0]["at"] = 99
    assert any("decreases" in p for p in ScenarioScript.from_obj(obj).validate())


def test_unknown_predicate_rejected():
    obj = load("empty").to_obj()
    obj["steps"] = [{"at": 0, "action": "expect", "predicate": "sky_is_blue", "args": {}}]
    assert any("unknown predicate" in p for p in ScenarioScript.from_obj(obj).validate())
    with pytest.raises(ValueError):
        run_scenario(ScenarioScript.from_obj(obj))


# ── runs ─────────────────────────────────────────────────────────────


def test_empty_scenario_trivial_trace():
    run = run_scenario(load("empty"))
    assert run.passed and run.expects == []
    assert run.trace.entries == []


def test_debate_scenario_passes():
    run = run_scenario(load("debate"))
    assert run.passed, [r.line() for r in run.expects]


def test_course_scenario_passes():
    run = run_scenario(load("course"))
    assert run.passed, [r.line() for r in run.expects]


def test_user_action_before_join_fails():
    obj = load("debate").to_obj()
    obj["steps"] = [s for s in obj["steps"] if s["action"] == "user_action"]
    with pytest.raises(ValueError):
        run_scenario(ScenarioScript.from_obj(obj))


def test_quiescence_soundness():
    """After quiescence, no further entries appear without new input."""
    script = load("debate")
    runtime = ScenarioRuntime(mode="inprocess")
    try:
        iid = runtime.server.create_activity(script.definition)
        host = runtime.add_host("alice")
        host.request_join(iid, "moderator")
        runtime.drive_to_quiescence()
        host.user_action(iid, "vote-slot", "propose_motion", {"motion": "m"})
        runtime.drive_to_quiescence()
        length = len(runtime.server.trace_of(iid).entries)
        for _ in range(3):
            runtime.drive_to_quiescence()
        assert len(runtime.server.trace_of(iid).entries) == length
    finally:
        runtime.shutdown()


# ── trace comparison ─────────────────────────────────────────────────


def test_compare_trace_to_itself():
    run = run_scenario(load("debate"))
    assert compare_traces(run.trace, run.trace).empty


def test_compare_different_scenarios():
    a = run_scenario(load("debate"))
    b = run_scenario(load("course"))
    diff = compare_traces(a.trace, b.trace)
    assert not diff.empty
    assert "differing entries" in diff.describe()


def test_two_runs_equal_traces():
    for name in SCENARIOS:
        a = run_scenario(load(name))
        b = run_scenario(load(name))
        assert compare_traces(a.trace, b.trace).empty, name


def test_mode_equivalence():
    for name in SCENARIOS:
        inproc = run_scenario(load(name), mode="inprocess")
        socks = run_scenario(load(name), mode="sockets")
        assert socks.passed
        diff = compare_traces(inproc.trace, socks.trace)
        assert diff.empty, f"{name}: {diff.describe()}"


# ── trace files and replay ───────────────────────────────────────────


def test_trace_file_roundtrip(tmp_path):
    run = run_scenario(load("debate"))
    path = tmp_path / "debate.jsonl"
    run.write_trace(path)
    meta, trace = read_trace_file(path)
    assert meta.definition == load("debate").definition
    assert trace.entries == run.trace.entries
    with open(path, encoding="utf-8") as src:
        for line in src:
            json.loads(line)  # every line is standalone JSON


def test_replay_reproduces_each_scenario():
    for name in SCENARIOS:
        run = run_scenario(load(name))
        diff = replay_check(run.meta, run.trace)
        assert diff.empty, f"{name}: {diff.describe()}"


def test_replay_detects_tampering():
    run = run_scenario(load("debate"))
    meta, trace = run.meta, run.trace
    # excise a regenerable entry: replay re-derives it and the diff shows
    doctored = [e for e in trace.entries if e.kind != "PhaseChanged"]
    assert len(doctored) < len(trace.entries)
    from coolda.model import Trace

    broken = Trace(trace.instance_id, doctored)
    fresh = replay_trace(meta, broken)
    assert not compare_traces(broken, fresh).empty


# ── trace-level invariants across a full run ─────────────────────────


def cascading_debate_script() -> ScenarioScript:
    """Debate plus a binding consuming the forum's stop notification, so a
    runtime cascade spans a command-mediated tool event."""
    obj = load("debate").to_obj()
    obj["scenario_id"] = "debate-cascading"
    obj["definition"]["bindings"].append(
        {
            "binding_id": "close-after-silence",
            "source": {"kind": "tool_event", "slot_id": "forum-slot", "event_name": "discussion_stopped"},
            "guard": None,
            "actions": [{"kind": "transition_phase", "target_phase": "closed"}],
        }
    )
    steps = [s for s in obj["steps"] if s["action"] in ("join", "user_action")]
    steps.append({"at": 9, "action": "expect", "predicate": "phase_is", "args": {"phase": "closed"}})
    obj["steps"] = steps
    return ScenarioScript.from_obj(obj)


def test_completions_follow_their_dispatches():
    run = run_scenario(cascading_debate_script())
    assert run.passed
    seen_dispatch_positions: dict[str, int] = {}
    for position, entry in enumerate(run.trace.entries):
        data = entry.data_map()
        if entry.kind == "CommandDispatched":
            seen_dispatch_positions[data["command"]["command_id"]] = position
        elif entry.kind == "CommandCompleted":
            assert data["command_id"] in seen_dispatch_positions
            assert seen_dispatch_positions[data["command_id"]] < position


def test_runtime_cascades_are_paths_in_the_static_graph():
    """Over-approximation: every consecutive trigger pair observed in any
    run's evaluations is an edge of the cascade report."""
    from coolda import engine
    from conftest import fresh_registry

    script = cascading_debate_script()
    registry = fresh_registry()
    descriptors = {
        s.slot_id: registry.describe_url(s.tool_url)[0] for s in script.definition.sub_activities
    }
    graph = engine.static_cascade_report(script.definition, descriptors)
    edges = set(graph.edges)

    run = run_scenario(script)
    assert run.passed

    def trigger_key_of(entry) -> str:
        trigger = entry.data_map()["trigger"]
        if trigger["kind"] == "tool_event":
            return f"event:{trigger['slot_id']}/{trigger['event_name']}"
        return f"phase:{trigger['phase']}"

    evaluations = run.trace.of_kind("GuardEvaluated")
    assert evaluations
    # intra-event chains: consecutive depths within one receive cascade
    by_seq = {e.seq: e for e in evaluations}
    for entry in evaluations:
        depth = entry.data_map()["depth"]
        if depth > 1:
            parent = by_seq.get(entry.seq - 1)
            if parent is not None:
                assert (trigger_key_of(parent), trigger_key_of(entry)) in edges
    # command-mediated chain: the stop command's tool event was evaluated,
    # and the static graph predicted that hop from the motion trigger
    keys = [trigger_key_of(e) for e in evaluations]
    assert "event:forum-slot/discussion_stopped" in keys
    assert ("event:vote-slot/motion_proposed", "event:forum-slot/discussion_stopped") in edges
