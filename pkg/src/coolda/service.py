"""Glue between the activity server core and host channels.

One ActivityService owns the server-side end of every host link,
regardless of transport: it turns envelopes into server calls and routes
dispatched commands back to the channel of the host that owns the target
slot. Replies share the sender's channel, so per-channel FIFO keeps each
host's view ordered.
"""

from __future__ import annotations

import logging
import threading

from .errors import CooldaError
from .model import Command, InterActivityEvent
from .server import ActivityServer
from .wire import Channel, ChannelClosed, Envelope

logger = logging.getLogger(__name__)


class ActivityService:
    def __init__(self, server: ActivityServer):
        self.server = server
        self._lock = threading.Lock()
        self._routes: dict[tuple[str, str], Channel] = {}  # (instance_id, user_id) -> channel
        self._host_ids: dict[int, str] = {}
        server.set_dispatcher(self._dispatch)

    def attach_channel(self, channel: Channel) -> None:
        channel.on_message(lambda env: self._handle(channel, env))

    # ── dispatch toward hosts ────────────────────────────────────

    def _dispatch(self, user_id: str, instance_id: str, command: Command) -> None:
        with self._lock:
            channel = self._routes.get((instance_id, user_id))
        if channel is None:
            logger.debug("no live channel for %s/%s; command %s not delivered", instance_id, user_id, command.command_id)
            return
        try:
            channel.send("command_down", {"command": command.to_obj()})
        except ChannelClosed:
            logger.warning("channel for %s/%s closed; command %s lost", instance_id, user_id, command.command_id)

    # ── envelope handling ────────────────────────────────────────

    def _reply_error(self, channel: Channel, kind: str, detail: str) -> None:
        try:
            channel.send("error", {"kind": kind, "detail": detail})
        except ChannelClosed:
            pass

    def _handle(self, channel: Channel, env: Envelope) -> None:
        body = env.body_map()
        try:
            if env.type == "hello":
                self._host_ids[id(channel)] = body.get("host_id", "?")
            elif env.type == "join":
                self._handle_join(channel, body)
            elif env.type == "event_up":
                try:
                    self.server.receive_event(InterActivityEvent.from_obj(body["event"]))
                except CooldaError as exc:
                    self._reply_error(channel, type(exc).__name__, str(exc))
            elif env.type == "completion":
                self.server.complete_command(
                    body["instance_id"], body["command_id"], body.get("status", "error"), body.get("error")
                )
            elif env.type == "state_sync":
                if "states" in body:
                    self.server.record_sub_states(body["instance_id"], body["user_id"], body["states"])
            elif env.type == "error":
                instance_id = body.get("instance_id")
                if instance_id:
                    self.server.record_external_error(instance_id, body.get("kind", "?"), body.get("detail", ""))
                else:
                    logger.warning("host error without instance: %s", body)
        except CooldaError as exc:
            self._reply_error(channel, type(exc).__name__, str(exc))
        except Exception:
            logger.exception("failed handling %s envelope", env.type)

    def _handle_join(self, channel: Channel, body: dict) -> None:
        instance_id = body["instance_id"]
        user_id = body["user_id"]
        try:
            grant = self.server.join(instance_id, user_id, body["requested_role"])
        except CooldaError as exc:
            try:
                channel.send("join", {"error": {"kind": type(exc).__name__, "detail": str(exc)}})
            except ChannelClosed:
                pass
            return
        with self._lock:
            self._routes[(instance_id, user_id)] = channel
        try:
            channel.send("join", {"grant": grant.to_obj()})
        except ChannelClosed:
            logger.warning("join reply lost for %s/%s", instance_id, user_id)
