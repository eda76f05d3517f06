#!/usr/bin/env python3
"""Drives the in-world side of the console round-trip test.

Plays two users against a running activity server: joins them (which
provisions their tool clients over the wire protocol), waits until the
console has created the reopen binding, then runs a vote to its decision.
The decision event must make the server reopen the forum through that
binding; this script verifies the forum really accepts posts again on
every client and exits 0.
"""

from __future__ import annotations

import argparse
import sys
import time

import httpx

from coolda import wire
from coolda.host import ToolHost
from coolda.registry import ToolRegistry
from coolda.tools import bundled_factories
from coolda.tools.base import BackendHub


def wait_for(label: str, predicate, timeout: float = 20.0, interval: float = 0.05):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        value = predicate()
        if value:
            return value
        time.sleep(interval)
    raise TimeoutError(f"timed out waiting for {label}")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--wire-port", type=int, required=True)
    parser.add_argument("--http-port", type=int, required=True)
    parser.add_argument("--instance", required=True)
    parser.add_argument("--binding-id", default="console-reopen")
    args = parser.parse_args()

    registry = ToolRegistry()
    for factory in bundled_factories(BackendHub()):
        registry.register_inprocess_tool(factory)

    hosts: dict[str, ToolHost] = {}
    channels = []
    for user, role in (("alice", "moderator"), ("bob", "debater")):
        channel = wire.connect(args.wire_port, label=f"driver-{user}")
        host = ToolHost(user, channel, registry)
        channel.start_reader()
        host.request_join(args.instance, role)
        hosts[user] = host
        channels.append(channel)

    wait_for(
        "tool provisioning",
        lambda: all(
            h.tool_ref(args.instance, slot) and h.tool_ref(args.instance, slot).state == "running"
            for h in hosts.values()
            for slot in ("vote-slot", "forum-slot")
        ),
    )
    print("driver: hosts joined and provisioned", flush=True)

    base = f"http://127.0.0.1:{args.http_port}"
    with httpx.Client(base_url=base, timeout=5.0) as client:
        wait_for(
            f"binding {args.binding_id} via console",
            lambda: args.binding_id
            in [b["binding_id"] for b in client.get(f"/instances/{args.instance}").json()["bindings"]],
            timeout=30.0,
        )
        print("driver: console binding observed", flush=True)

        alice, bob = hosts["alice"], hosts["bob"]
        poll_id = alice.user_action(args.instance, "vote-slot", "propose_motion", {"motion": "reopen later"})
        wait_for(
            "forum frozen by the motion",
            lambda: all(
                h.tool_state(args.instance, "forum-slot")["accepting"] is False for h in hosts.values()
            ),
        )
        print("driver: motion proposed, forum frozen", flush=True)

        alice.user_action(args.instance, "vote-slot", "cast_vote", {"poll_id": poll_id, "choice": "yes"})
        bob.user_action(args.instance, "vote-slot", "cast_vote", {"poll_id": poll_id, "choice": "yes"})
        outcome = alice.user_action(args.instance, "vote-slot", "decide_motion", {"poll_id": poll_id})
        print(f"driver: motion decided: {outcome}", flush=True)

        wait_for(
            "forum reopened by the console binding",
            lambda: all(
                h.tool_state(args.instance, "forum-slot")["accepting"] is True for h in hosts.values()
            ),
        )
        bob.user_action(args.instance, "forum-slot", "post_message", {"text": "we are back"})

    for channel in channels:
        channel.close()
    print("DRIVER OK", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
