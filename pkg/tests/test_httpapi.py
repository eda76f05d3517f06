"""Console HTTP API: endpoints and the resumable trace stream."""

from __future__ import annotations

import json
import uuid

import httpx
import pytest

from coolda.httpapi import ConsoleApi
from coolda.model import Action, Binding, InterActivityEvent, Trigger
from coolda.server import ActivityServer
from conftest import debate_definition, fresh_registry


@pytest.fixture
def api():
    server = ActivityServer(fresh_registry())
    console = ConsoleApi(server, port=0)
    console.start()
    yield console
    console.stop()


def base(api: ConsoleApi) -> str:
    return f"http://127.0.0.1:{api.port}"


def motion_event(iid: str) -> InterActivityEvent:
    return InterActivityEvent(
        event_id=str(uuid.uuid4()),
        instance_id=iid,
        slot_id="vote-slot",
        event_name="motion_proposed",
        payload=(("actor", "alice"), ("motion", "m"), ("motion_id", "p1")),
        actor="alice",
    )


def test_instance_lifecycle_over_http(api):
    with httpx.Client(base_url=base(api), timeout=5.0) as client:
        resp = client.get("/instances")
        assert resp.status_code == 200 and resp.json() == {"instances": []}

        resp = client.post("/instances", json=debate_definition().to_obj())
        assert resp.status_code == 201
        iid = resp.json()["instance_id"]

        resp = client.get(f"/instances/{iid}")
        assert resp.status_code == 200
        snap = resp.json()
        assert snap["phase"] == "open" and snap["seq"] == 0
        assert {s["slot_id"] for s in snap["sub_instances"]} == {"vote-slot", "forum-slot"}

        resp = client.get("/instances")
        assert [i["instance_id"] for i in resp.json()["instances"]] == [iid]

        resp = client.get("/instances/ghost")
        assert resp.status_code == 404


def test_invalid_definition_reports_violations(api):
    bad = debate_definition().to_obj()
    bad["initial_phase"] = "nowhere"
    with httpx.Client(base_url=base(api), timeout=5.0) as client:
        resp = client.post("/instances", json=bad)
    assert resp.status_code == 400
    error = resp.json()["error"]
    assert error["kind"] == "InvalidDefinition"
    assert any(v["rule"] == "initial_phase_missing" for v in error["violations"])


def test_binding_endpoints(api):
    with httpx.Client(base_url=base(api), timeout=5.0) as client:
        iid = client.post("/instances", json=debate_definition().to_obj()).json()["instance_id"]
        binding = Binding(
            binding_id="reopen",
            source=Trigger.tool_event("vote-slot", "motion_decided"),
            actions=(Action.invoke_command("forum-slot", "ia_resume_discussion", {}),),
        )
        resp = client.post(f"/instances/{iid}/bindings", json=binding.to_obj())
        assert resp.status_code == 201 and resp.json() == {"binding_id": "reopen"}

        snap = client.get(f"/instances/{iid}").json()
        assert "reopen" in [b["binding_id"] for b in snap["bindings"]]

        bad = binding.to_obj()
        bad["binding_id"] = "bad"
        bad["actions"][0]["command_name"] = "ia_missing"
        resp = client.post(f"/instances/{iid}/bindings", json=bad)
        assert resp.status_code == 400
        assert any(v["rule"] == "unknown_command" for v in resp.json()["error"]["violations"])

        assert client.delete(f"/instances/{iid}/bindings/reopen").status_code == 204
        snap = client.get(f"/instances/{iid}").json()
        assert "reopen" not in [b["binding_id"] for b in snap["bindings"]]
        assert client.delete(f"/instances/{iid}/bindings/reopen").status_code == 404


def test_tools_proxy(api, artifact_server, scratch_artifact_server):
    with httpx.Client(base_url=base(api), timeout=5.0) as client:
        resp = client.get("/tools", params={"url": "local:vote"})
        assert resp.status_code == 200
        descriptor = resp.json()
        assert descriptor["tool_id"] == "vote"
        assert "motion_proposed" in [e["name"] for e in descriptor["events"]]

        resp = client.get("/tools", params={"url": artifact_server.url("forum.py")})
        assert resp.status_code == 200 and resp.json()["tool_id"] == "forum"

        resp = client.get("/tools", params={"url": "local:ghost"})
        assert resp.status_code == 502

        resp = client.get("/tools", params={"url": scratch_artifact_server.url("noise.bin")})
        assert resp.status_code == 422

        resp = client.get("/tools")
        assert resp.status_code == 400


def sse_events(response, limit: int, collected: list) -> None:
    current: dict = {}
    for line in response.iter_lines():
        if line.startswith("id:"):
            current["id"] = int(line.split(":", 1)[1].strip())
        elif line.startswith("data:"):
            current["data"] = json.loads(line.split(":", 1)[1].strip())
        elif not line and current:
            if "data" in current:
                collected.append(current)
            current = {}
            if len(collected) >= limit:
                return


def test_stream_delivers_and_resumes(api):
    server = api.server
    iid = server.create_activity(debate_definition())
    server.join(iid, "alice", "moderator")
    server.receive_event(motion_event(iid))
    total = len(server.trace_of(iid).entries)
    assert total >= 4

    first_batch: list = []
    with httpx.Client(base_url=base(api), timeout=10.0) as client:
        with client.stream("GET", f"/instances/{iid}/stream") as resp:
            assert resp.headers["content-type"].startswith("text/event-stream")
            sse_events(resp, 2, first_batch)  # stop mid-stream: forced disconnect

        last_seen = first_batch[-1]["id"]
        rest: list = []
        with client.stream(
            "GET", f"/instances/{iid}/stream", headers={"Last-Event-ID": str(last_seen)}
        ) as resp:
            sse_events(resp, total - len(first_batch), rest)

    got = first_batch + rest
    assert [e["id"] for e in got] == list(range(total))  # no gaps, no duplicates
    entries = server.trace_of(iid).entries
    assert [e["data"]["kind"] for e in got] == [e.kind for e in entries]
    seqs = [e["data"]["seq"] for e in got]
    assert seqs == sorted(seqs)


def test_stream_query_param_resume(api):
    server = api.server
    iid = server.create_activity(debate_definition())
    server.join(iid, "alice", "moderator")
    collected: list = []
    with httpx.Client(base_url=base(api), timeout=10.0) as client:
        with client.stream("GET", f"/instances/{iid}/stream", params={"from": "-1"}) as resp:
            sse_events(resp, 1, collected)
    assert collected[0]["data"]["kind"] == "ParticipantJoined"


def test_stream_unknown_instance(api):
    with httpx.Client(base_url=base(api), timeout=5.0) as client:
        resp = client.get("/instances/ghost/stream")
        assert resp.status_code == 404
