"""Core model: validation, role mapping, canonical JSON round-trips."""

from __future__ import annotations

import json

from hypothesis import given, settings
from hypothesis import strategies as st

from coolda.model import (
    Action,
    ActivityDefinition,
    Binding,
    Command,
    Guard,
    GuardAtom,
    InterActivityEvent,
    RoleMapping,
    ToolDescriptor,
    Trigger,
    canonical_json,
    map_roles,
    payload_violations,
    validate_activity_definition,
)
from conftest import debate_definition


def rules(violations):
    return sorted(v.rule for v in violations)


# ── validation ───────────────────────────────────────────────────────


def test_wellformed_debate_validates_clean():
    assert validate_activity_definition(debate_definition()) == []


def test_unknown_slot_in_action():
    base = debate_definition()
    bad = Binding(
        binding_id="bad",
        source=Trigger.tool_event("vote-slot", "motion_proposed"),
        actions=(Action.invoke_command("forrum", "ia_stop_discussion", {}),),
    )
    obj = base.to_obj()
    obj["bindings"].append(bad.to_obj())
    violations = validate_activity_definition(ActivityDefinition.from_obj(obj))
    assert any(v.rule == "unknown_slot" and v.detail == "forrum" for v in violations)


def test_initial_phase_missing():
    definition = ActivityDefinition.from_obj(
        {**debate_definition().to_obj(), "initial_phase": "nowhere"}
    )
    assert "initial_phase_missing" in rules(validate_activity_definition(definition))


def test_duplicate_phases_and_slots_flagged():
    obj = debate_definition().to_obj()
    obj["phases"] = ["open", "open"]
    obj["initial_phase"] = "open"
    obj["sub_activities"].append(obj["sub_activities"][0])
    found = rules(validate_activity_definition(ActivityDefinition.from_obj(obj)))
    assert "phases_duplicate" in found and "duplicate_slot_id" in found


def test_role_mapping_rules():
    obj = debate_definition().to_obj()
    obj["role_mappings"].append({"parent_role": "king", "slot_id": "vote-slot", "sub_role": "chair"})
    obj["role_mappings"].append({"parent_role": "moderator", "slot_id": "vote-slot", "sub_role": "again"})
    found = rules(validate_activity_definition(ActivityDefinition.from_obj(obj)))
    assert "role_mapping_unknown_role" in found and "role_mapping_duplicate" in found


def test_invalid_tool_url():
    obj = debate_definition().to_obj()
    obj["sub_activities"][0]["tool_url"] = "not a url"
    assert "invalid_tool_url" in rules(validate_activity_definition(ActivityDefinition.from_obj(obj)))


def test_empty_actions_flagged():
    obj = debate_definition().to_obj()
    obj["bindings"][0]["actions"] = []
    assert "empty_actions" in rules(validate_activity_definition(ActivityDefinition.from_obj(obj)))


def test_descriptor_aware_validation(registry):
    definition = debate_definition()
    descriptors = {s.slot_id: registry.describe_url(s.tool_url)[0] for s in definition.sub_activities}
    assert validate_activity_definition(definition, descriptors) == []

    obj = definition.to_obj()
    obj["bindings"][0]["actions"][1]["command_name"] = "ia_not_there"
    bad = ActivityDefinition.from_obj(obj)
    assert "unknown_command" in rules(validate_activity_definition(bad, descriptors))

    obj = definition.to_obj()
    obj["bindings"][0]["source"]["event_name"] = "never_declared"
    bad = ActivityDefinition.from_obj(obj)
    assert "unknown_event" in rules(validate_activity_definition(bad, descriptors))


def test_arg_map_coverage_checked(registry):
    definition = debate_definition()
    descriptors = {s.slot_id: registry.describe_url(s.tool_url)[0] for s in definition.sub_activities}
    obj = definition.to_obj()
    obj["bindings"][0]["actions"][1] = {
        "kind": "invoke_command",
        "slot_id": "vote-slot",
        "command_name": "ia_close_poll",
        "args": {},  # poll_id not mapped
    }
    bad = ActivityDefinition.from_obj(obj)
    assert "arg_map_incomplete" in rules(validate_activity_definition(bad, descriptors))


# ── map_roles ────────────────────────────────────────────────────────

COURSE_MAPPINGS = (
    RoleMapping("professor", "doc-share", "presenter"),
    RoleMapping("professor", "audio", "orator"),
    RoleMapping("student", "doc-share", "viewer"),
)


def test_professor_projection():
    assert map_roles(COURSE_MAPPINGS, "professor") == {"doc-share": "presenter", "audio": "orator"}


def test_student_projection():
    assert map_roles(COURSE_MAPPINGS, "student") == {"doc-share": "viewer"}


def test_empty_mappings():
    assert map_roles((), "anything") == {}


@given(st.integers(0, 20), st.sampled_from(["professor", "student", "ghost"]))
def test_map_roles_pure_and_bounded(n, role):
    mappings = COURSE_MAPPINGS[: n % 4]
    first = map_roles(mappings, role)
    second = map_roles(mappings, role)
    assert first == second
    assert len(first) <= len({m.slot_id for m in mappings})


# ── referential closure ──────────────────────────────────────────────


def test_referential_closure_of_valid_definition(registry):
    definition = debate_definition()
    descriptors = {s.slot_id: registry.describe_url(s.tool_url)[0] for s in definition.sub_activities}
    assert validate_activity_definition(definition, descriptors) == []
    slot_ids = {s.slot_id for s in definition.sub_activities}
    for m in definition.role_mappings:
        assert m.slot_id in slot_ids and m.parent_role in definition.roles
    for b in definition.bindings:
        if b.source.kind == "tool_event":
            assert b.source.slot_id in slot_ids
            assert descriptors[b.source.slot_id].event(b.source.event_name) is not None
        else:
            assert b.source.phase in definition.phases
        for a in b.actions:
            if a.kind == "transition_phase":
                assert a.target_phase in definition.phases
            else:
                assert a.slot_id in slot_ids
                assert descriptors[a.slot_id].command(a.command_name) is not None


# ── canonical JSON ───────────────────────────────────────────────────


def test_canonical_form_is_sorted_and_tight():
    text = canonical_json({"b": 1, "a": [1, 2], "c": {"z": True, "y": None}})
    assert text == '{"a":[1,2],"b":1,"c":{"y":null,"z":true}}'


def test_definition_roundtrip():
    definition = debate_definition()
    again = ActivityDefinition.from_obj(json.loads(canonical_json(definition.to_obj())))
    assert again == definition


def test_event_and_command_roundtrip():
    event = InterActivityEvent(
        event_id="e1",
        instance_id="i1",
        slot_id="s",
        event_name="n",
        payload=(("a", 1), ("b", "x")),
        actor="alice",
        emitted_seq=4,
    )
    assert InterActivityEvent.from_obj(json.loads(canonical_json(event.to_obj()))) == event

    command = Command(
        command_id="c1",
        instance_id="i1",
        slot_id="s",
        command_name="ia_x",
        args=(("k", "v"),),
        caused_by="e1",
        depth=2,
    )
    assert Command.from_obj(json.loads(canonical_json(command.to_obj()))) == command


@settings(max_examples=200)
@given(
    st.recursive(
        st.one_of(st.none(), st.booleans(), st.integers(-5, 5), st.text(max_size=6)),
        lambda inner: st.dictionaries(st.text(max_size=4), inner, max_size=3),
        max_leaves=8,
    )
)
def test_canonical_json_roundtrips_arbitrary_payloads(payload):
    assert json.loads(canonical_json(payload)) == payload


def test_descriptor_roundtrip(registry):
    descriptor, _ = registry.describe_url("local:vote")
    again = ToolDescriptor.from_obj(json.loads(canonical_json(descriptor.to_obj())))
    assert again == descriptor


def test_binding_roundtrip():
    binding = Binding(
        binding_id="b",
        source=Trigger.phase_entered("p"),
        guard=Guard((GuardAtom("$phase", "!=", "q"), GuardAtom("f", "<", 3))),
        actions=(
            Action.invoke_command("s", "ia_x", {"u": "$actor", "n": 3}),
            Action.transition_phase("q"),
        ),
    )
    assert Binding.from_obj(json.loads(canonical_json(binding.to_obj()))) == binding


# ── payload conformance ──────────────────────────────────────────────


def test_payload_conformance_exact_match():
    schema = {"motion": "string", "count": "integer", "urgent": "boolean"}
    assert payload_violations({"motion": "m", "count": 2, "urgent": False}, schema) == []
    assert rules(payload_violations({"motion": "m", "count": 2}, schema)) == ["payload_field_missing"]
    assert rules(payload_violations({"motion": "m", "count": True, "urgent": False}, schema)) == [
        "payload_type_mismatch"
    ]
    assert "payload_field_unknown" in rules(
        payload_violations({"motion": "m", "count": 1, "urgent": True, "extra": 0}, schema)
    )
