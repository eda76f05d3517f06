"""Binding evaluation against a brute-force oracle plus its own examples.

The oracle below restates the matching/guard/arg rules as literally as
possible and is kept independent of the production code path: it works on
plain dicts and enumerates every binding unconditionally.
"""

from __future__ import annotations

import random
from types import SimpleNamespace

import pytest

from coolda import engine
from coolda.engine import TriggerOccurrence
from coolda.model import Action, Binding, Guard, GuardAtom, Trigger
from conftest import debate_definition

# ── the oracle ───────────────────────────────────────────────────────


def oracle_matches(source: Trigger, occurred: Trigger) -> bool:
    if source.kind == "tool_event" and occurred.kind == "tool_event":
        return (source.slot_id, source.event_name) == (occurred.slot_id, occurred.event_name)
    if source.kind == "phase_entered" and occurred.kind == "phase_entered":
        return source.phase == occurred.phase
    return False


def oracle_guard(guard, payload: dict, phase: str):
    """Returns (passed, missing-field or None)."""
    if guard is None:
        return True, None
    for atom in guard.atoms:
        if atom.fieldname == "$phase":
            value = phase
        elif atom.fieldname in payload:
            value = payload[atom.fieldname]
        else:
            return False, atom.fieldname
        try:
            holds = {
                "=": value == atom.value,
                "!=": value != atom.value,
                "<": value < atom.value,
                ">": value > atom.value,
            }[atom.op]
        except TypeError:
            holds = False
        if not holds:
            return False, None
    return True, None


def oracle_args(arg_map: dict, payload: dict, actor, role):
    out = {}
    for name, src in arg_map.items():
        if src == "$actor":
            if actor is None:
                return None
            out[name] = actor
        elif src == "$role":
            if role is None:
                return None
            out[name] = role
        elif isinstance(src, str) and src.startswith("payload."):
            key = src.split(".", 1)[1]
            if key not in payload:
                return None
            out[name] = payload[key]
        else:
            out[name] = src
    return out


def oracle_evaluate(phase: str, bindings, occ: TriggerOccurrence):
    """Literal enumeration of the evaluation definition."""
    payload = occ.payload_map()
    effects = []
    for b in bindings:
        if not oracle_matches(b.source, occ.source):
            continue
        passed, _missing = oracle_guard(b.guard, payload, phase)
        if not passed:
            continue
        for action in b.actions:
            if action.kind == "transition_phase":
                effects.append(("phase", action.target_phase, b.binding_id))
            else:
                args = oracle_args(action.args_map(), payload, occ.actor, occ.actor_role)
                if args is None:
                    continue
                effects.append(("command", action.slot_id, action.command_name, tuple(sorted(args.items())), b.binding_id))
    return effects


def flatten(effects):
    out = []
    for eff in effects:
        if isinstance(eff, engine.TransitionEffect):
            out.append(("phase", eff.target_phase, eff.binding_id))
        else:
            out.append(("command", eff.slot_id, eff.command_name, eff.args, eff.binding_id))
    return out


# ── spec'd examples ──────────────────────────────────────────────────


def test_debate_motion_effects():
    definition = debate_definition()
    state = SimpleNamespace(phase="open", bindings=definition.bindings)
    occ = TriggerOccurrence(
        source=Trigger.tool_event("vote-slot", "motion_proposed"),
        payload=(("actor", "alice"), ("motion", "close"), ("motion_id", "p1")),
        actor="alice",
        actor_role="moderator",
    )
    result = engine.evaluate(state, occ)
    assert flatten(result.effects) == [
        ("phase", "motion-pending", "motion-pauses-forum"),
        ("command", "forum-slot", "ia_stop_discussion", (), "motion-pauses-forum"),
    ]
    assert [e.guard_passed for e in result.evaluations] == [True]


def test_no_bindings_vacuous():
    state = SimpleNamespace(phase="open", bindings=())
    occ = TriggerOccurrence(source=Trigger.tool_event("s", "e"))
    result = engine.evaluate(state, occ)
    assert result.effects == () and result.evaluations == ()


def test_three_bindings_guard_selection():
    """Guards (phase=open), (phase=closed), none: first and third fire."""
    mk = lambda bid, guard: Binding(
        binding_id=bid,
        source=Trigger.tool_event("s", "e"),
        guard=guard,
        actions=(Action.transition_phase(f"to-{bid}"),),
    )
    bindings = (
        mk("b1", Guard((GuardAtom("$phase", "=", "open"),))),
        mk("b2", Guard((GuardAtom("$phase", "=", "closed"),))),
        mk("b3", None),
    )
    occ = TriggerOccurrence(source=Trigger.tool_event("s", "e"))
    state = SimpleNamespace(phase="open", bindings=bindings)

    expected = oracle_evaluate("open", bindings, occ)
    got = flatten(engine.evaluate(state, occ).effects)
    assert got == expected
    assert [e[1] for e in got] == ["to-b1", "to-b3"]


def test_guard_field_missing_skips_binding():
    binding = Binding(
        binding_id="b",
        source=Trigger.tool_event("s", "e"),
        guard=Guard((GuardAtom("absent", "=", 1),)),
        actions=(Action.transition_phase("q"),),
    )
    state = SimpleNamespace(phase="p", bindings=(binding,))
    result = engine.evaluate(state, TriggerOccurrence(source=Trigger.tool_event("s", "e")))
    assert result.effects == ()
    assert result.evaluations[0].guard_passed is False
    assert result.evaluations[0].notes == ("guard_field_missing:absent",)


# ── resolve_args examples ────────────────────────────────────────────


def test_resolve_actor_substitution():
    assert engine.resolve_args({"user": "$actor"}, {}, "alice", None) == {"user": "alice"}


def test_resolve_payload_path():
    assert engine.resolve_args({"motion": "payload.motion_id"}, {"motion_id": "m1"}, None, None) == {"motion": "m1"}


def test_resolve_missing_path_fails():
    with pytest.raises(engine.ArgResolutionFailed):
        engine.resolve_args({"x": "payload.x"}, {}, None, None)


def test_resolve_role_and_literals():
    args = engine.resolve_args({"r": "$role", "n": 7, "s": "plain"}, {}, "alice", "moderator")
    assert args == {"r": "moderator", "n": 7, "s": "plain"}


def test_arg_resolution_failure_skips_action_only():
    binding = Binding(
        binding_id="b",
        source=Trigger.tool_event("s", "e"),
        actions=(
            Action.invoke_command("s", "ia_x", {"u": "$actor"}),  # actor absent: skipped
            Action.transition_phase("q"),
        ),
    )
    state = SimpleNamespace(phase="p", bindings=(binding,))
    result = engine.evaluate(state, TriggerOccurrence(source=Trigger.tool_event("s", "e"), actor=None))
    assert flatten(result.effects) == [("phase", "q", "b")]
    assert result.evaluations[0].notes == ("arg_resolution_failed:ia_x:$actor",)


# ── random fixtures vs the oracle ────────────────────────────────────

PHASES = ["alpha", "beta", "gamma"]
EVENTS = ["e1", "e2", "e3", "e4"]
SLOTS = ["s1", "s2"]
FIELDS = ["f1", "f2", "f3"]


def random_fixture(rng: random.Random):
    n_phases = rng.randint(1, 3)
    phases = PHASES[:n_phases]
    bindings = []
    for i in range(rng.randint(0, 5)):
        if rng.random() < 0.6:
            source = Trigger.tool_event(rng.choice(SLOTS), rng.choice(EVENTS))
        else:
            source = Trigger.phase_entered(rng.choice(phases))
        guard = None
        if rng.random() < 0.5:
            atoms = []
            for _ in range(rng.randint(1, 2)):
                if rng.random() < 0.4:
                    atoms.append(GuardAtom("$phase", rng.choice(["=", "!="]), rng.choice(phases)))
                else:
                    atoms.append(
                        GuardAtom(rng.choice(FIELDS), rng.choice(["=", "!=", "<", ">"]), rng.randint(0, 3))
                    )
            guard = Guard(tuple(atoms))
        actions = []
        for _ in range(rng.randint(1, 3)):
            if rng.random() < 0.5:
                actions.append(Action.transition_phase(rng.choice(phases)))
            else:
                source_kinds = ["$actor", "$role", f"payload.{rng.choice(FIELDS)}", rng.randint(0, 9), "lit"]
                actions.append(
                    Action.invoke_command(
                        rng.choice(SLOTS),
                        f"ia_cmd{rng.randint(1, 3)}",
                        {"a": rng.choice(source_kinds)},
                    )
                )
        bindings.append(Binding(binding_id=f"b{i}", source=source, guard=guard, actions=tuple(actions)))

    phase = rng.choice(phases)
    if rng.random() < 0.7:
        source = Trigger.tool_event(rng.choice(SLOTS), rng.choice(EVENTS))
    else:
        source = Trigger.phase_entered(rng.choice(phases))
    payload = tuple(sorted((f, rng.randint(0, 3)) for f in rng.sample(FIELDS, rng.randint(0, 3))))
    occ = TriggerOccurrence(
        source=source,
        payload=payload,
        actor=rng.choice([None, "alice", "bob"]),
        actor_role=rng.choice([None, "moderator"]),
        depth=rng.randint(1, 3),
    )
    return phase, tuple(bindings), occ


def test_oracle_equivalence_1000_fixtures():
    rng = random.Random(20260810)
    mismatches = 0
    for _ in range(1000):
        phase, bindings, occ = random_fixture(rng)
        got = flatten(engine.evaluate(SimpleNamespace(phase=phase, bindings=bindings), occ).effects)
        expected = oracle_evaluate(phase, bindings, occ)
        if got != expected:
            mismatches += 1
    assert mismatches == 0


def test_purity_repeated_calls():
    rng = random.Random(7)
    for _ in range(50):
        phase, bindings, occ = random_fixture(rng)
        state = SimpleNamespace(phase=phase, bindings=bindings)
        first = engine.evaluate(state, occ)
        second = engine.evaluate(state, occ)
        assert first == second


def test_monotone_matching():
    """Adding a binding keeps all previously produced effects (as a prefix)."""
    rng = random.Random(99)
    for _ in range(200):
        phase, bindings, occ = random_fixture(rng)
        base = flatten(engine.evaluate(SimpleNamespace(phase=phase, bindings=bindings), occ).effects)
        extra = Binding(
            binding_id="extra",
            source=occ.source,
            actions=(Action.transition_phase(phase),),
        )
        grown = flatten(
            engine.evaluate(SimpleNamespace(phase=phase, bindings=bindings + (extra,)), occ).effects
        )
        assert grown[: len(base)] == base


# ── static cascade report ────────────────────────────────────────────


def brute_force_cycles(nodes, edges):
    """Independent cycle enumeration by DFS over all simple paths."""
    adjacency = {n: [] for n in nodes}
    for a, b in edges:
        adjacency.setdefault(a, []).append(b)
    cycles = set()

    def walk(start, node, path):
        for nxt in adjacency.get(node, []):
            if nxt == start:
                cycle = tuple(path)
                pivot = min(range(len(cycle)), key=lambda i: cycle[i])
                cycles.add(tuple(cycle[pivot:] + cycle[:pivot]))
            elif nxt not in path and nxt > start:
                walk(start, nxt, path + [nxt])

    for n in sorted(adjacency):
        walk(n, n, [n])
    return sorted(cycles)


def test_debate_cascade_graph_acyclic(registry):
    definition = debate_definition()
    descriptors = {s.slot_id: registry.describe_url(s.tool_url)[0] for s in definition.sub_activities}
    graph = engine.static_cascade_report(definition, descriptors)
    assert ("event:vote-slot/motion_proposed", "phase:motion-pending") in graph.edges
    assert graph.cycles == ()


def test_two_binding_phase_cycle_reported():
    from coolda.model import ActivityDefinition

    definition = ActivityDefinition(
        definition_id="cyclic",
        kind="test",
        phases=("p", "q"),
        initial_phase="p",
        roles=("r",),
        bindings=(
            Binding("a", Trigger.phase_entered("p"), (Action.transition_phase("q"),)),
            Binding("b", Trigger.phase_entered("q"), (Action.transition_phase("p"),)),
        ),
    )
    graph = engine.static_cascade_report(definition)
    assert graph.cycles == (("phase:p", "phase:q"),)
    assert graph.cycles == tuple(brute_force_cycles(graph.nodes, graph.edges))


def test_empty_definition_empty_graph():
    from coolda.model import ActivityDefinition

    definition = ActivityDefinition(
        definition_id="none", kind="t", phases=("p",), initial_phase="p", roles=("r",)
    )
    graph = engine.static_cascade_report(definition)
    assert graph.nodes == () and graph.edges == () and graph.cycles == ()


def test_random_graph_cycles_match_bruteforce(registry):
    """networkx cycle listing agrees with the DFS enumerator on small graphs."""
    import networkx as nx

    rng = random.Random(5)
    for _ in range(100):
        n = rng.randint(1, 6)
        nodes = [f"n{i}" for i in range(n)]
        edges = sorted({(rng.choice(nodes), rng.choice(nodes)) for _ in range(rng.randint(0, 8))})
        edges = [(a, b) for a, b in edges if a != b]
        g = nx.DiGraph(edges)
        g.add_nodes_from(nodes)
        from coolda.engine import _normalize_cycle

        nx_cycles = sorted(_normalize_cycle(c) for c in nx.simple_cycles(g))
        assert nx_cycles == brute_force_cycles(nodes, edges)


def test_incomparable_guard_types_fail_closed():
    binding = Binding(
        binding_id="b",
        source=Trigger.tool_event("s", "e"),
        guard=Guard((GuardAtom("f", "<", 3),)),
        actions=(Action.transition_phase("q"),),
    )
    state = SimpleNamespace(phase="p", bindings=(binding,))
    occ = TriggerOccurrence(source=Trigger.tool_event("s", "e"), payload=(("f", "not-a-number"),))
    result = engine.evaluate(state, occ)
    assert result.effects == ()
    assert result.evaluations[0].guard_passed is False
    # the oracle agrees on fail-closed comparisons
    assert oracle_evaluate("p", (binding,), occ) == []


def test_command_edges_connect_consumed_tool_events(registry):
    """A binding that commands a tool links to the tool's declared events
    that other bindings consume."""
    base = debate_definition()
    followup = Binding(
        binding_id="close-after-silence",
        source=Trigger.tool_event("forum-slot", "discussion_stopped"),
        actions=(Action.transition_phase("closed"),),
    )
    obj = base.to_obj()
    obj["bindings"].append(followup.to_obj())
    from coolda.model import ActivityDefinition

    definition = ActivityDefinition.from_obj(obj)
    descriptors = {s.slot_id: registry.describe_url(s.tool_url)[0] for s in definition.sub_activities}
    graph = engine.static_cascade_report(definition, descriptors)
    # the stop command can make the forum emit discussion_stopped, which is consumed
    assert ("event:vote-slot/motion_proposed", "event:forum-slot/discussion_stopped") in graph.edges
    assert ("event:forum-slot/discussion_stopped", "phase:closed") in graph.edges
    assert graph.cycles == ()
