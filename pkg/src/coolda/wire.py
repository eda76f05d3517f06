"""Host/server wire protocol: newline-delimited JSON over a duplex channel.

Envelope: ``{"type": t, "seq": n, "body": {...}}`` with type one of hello,
join, event_up, command_down, completion, state_sync, error. Bodies are
the canonical JSON encodings of the core types.

Two channel implementations share the codec so both scenario modes run the
exact same message semantics:

  - MemoryChannelPair: two FIFO queues pumped cooperatively by the
    scenario runtime (fully deterministic, single thread);
  - TCP sockets with one reader thread per side.

Both directions count sent and delivered messages; quiescence detection
compares the counters across the pair.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable

logger = logging.getLogger(__name__)

ENVELOPE_TYPES = ("hello", "join", "event_up", "command_down", "completion", "state_sync", "error")


@dataclass(frozen=True)
class Envelope:
    type: str
    seq: int
    body: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def of(cls, type: str, seq: int, body: dict) -> "Envelope":
        return cls(type=type, seq=seq, body=tuple(sorted(body.items())))

    def body_map(self) -> dict[str, Any]:
        return dict(self.body)

    def encode(self) -> str:
        obj = {"type": self.type, "seq": self.seq, "body": dict(self.body)}
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def decode_envelope(line: str) -> Envelope:
    obj = json.loads(line)
    if obj.get("type") not in ENVELOPE_TYPES:
        raise ValueError(f"unknown envelope type {obj.get('type')!r}")
    return Envelope.of(obj["type"], obj.get("seq", 0), obj.get("body", {}))


class ChannelClosed(Exception):
    pass


class Channel:
    """One endpoint of a duplex message stream."""

    def __init__(self) -> None:
        self.sent = 0
        self.delivered = 0  # messages handed to this endpoint's handler
        self._handler: Callable[[Envelope], None] | None = None
        self._seq = 0

    def on_message(self, handler: Callable[[Envelope], None]) -> None:
        self._handler = handler

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def send(self, type: str, body: dict) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError

    def _deliver(self, env: Envelope) -> None:
        if self._handler is not None:
            self._handler(env)
        # counted only after the handler returns, so sent/delivered parity
        # across a channel pair means every consequence has been produced
        self.delivered += 1


class MemoryChannel(Channel):
    def __init__(self) -> None:
        super().__init__()
        self.peer: "MemoryChannel | None" = None
        self.inbox: deque[str] = deque()
        self.closed = False

    def send(self, type: str, body: dict) -> None:
        if self.closed or self.peer is None:
            raise ChannelClosed()
        env = Envelope.of(type, self.next_seq(), body)
        # encode/decode even in memory so both modes exercise the codec
        self.peer.inbox.append(env.encode())
        self.sent += 1

    def pump_one(self) -> bool:
        """Deliver one pending inbound message; False when idle."""
        if not self.inbox:
            return False
        line = self.inbox.popleft()
        self._deliver(decode_envelope(line))
        return True

    def pending(self) -> int:
        return len(self.inbox)

    def close(self) -> None:
        self.closed = True


def memory_channel_pair() -> tuple[MemoryChannel, MemoryChannel]:
    a, b = MemoryChannel(), MemoryChannel()
    a.peer, b.peer = b, a
    return a, b


class SocketChannel(Channel):
    """NDJSON over a connected TCP socket, reader in a daemon thread."""

    def __init__(self, sock: socket.socket, label: str = "") -> None:
        super().__init__()
        self._sock = sock
        self._wlock = threading.Lock()
        self._rfile = sock.makefile("r", encoding="utf-8", newline="\n")
        self._label = label
        self._closed = False
        self._reader: threading.Thread | None = None

    def start_reader(self) -> None:
        self._reader = threading.Thread(target=self._read_loop, name=f"wire-reader-{self._label}", daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        try:
            for line in self._rfile:
                line = line.strip()
                if not line:
                    continue
                try:
                    env = decode_envelope(line)
                except ValueError:
                    logger.warning("dropping undecodable wire line on %s", self._label)
                    continue
                self._deliver(env)
        except (OSError, ValueError):
            pass
        finally:
            self._closed = True

    def send(self, type: str, body: dict) -> None:
        if self._closed:
            raise ChannelClosed()
        env = Envelope.of(type, self.next_seq(), body)
        data = (env.encode() + "\n").encode("utf-8")
        with self._wlock:
            try:
                self._sock.sendall(data)
            except OSError as exc:
                self._closed = True
                raise ChannelClosed() from exc
        self.sent += 1

    def close(self) -> None:
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass


class WireServer:
    """Accepts host connections and hands each a SocketChannel."""

    def __init__(self, port: int, on_connect: Callable[[SocketChannel], None], host: str = "127.0.0.1") -> None:
        self._on_connect = on_connect
        self.channels: list[SocketChannel] = []
        outer = self

        class _Handler(socketserver.BaseRequestHandler):
            def handle(self) -> None:
                channel = SocketChannel(self.request, label=f"server<-{self.client_address}")
                outer.channels.append(channel)
                outer._on_connect(channel)
                # reuse the handler thread as the reader
                channel._read_loop()

        self._server = socketserver.ThreadingTCPServer((host, port), _Handler, bind_and_activate=False)
        self._server.allow_reuse_address = True
        self._server.daemon_threads = True
        self._server.server_bind()
        self._server.server_activate()
        self.port = self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever, name="wire-accept", daemon=True)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        for ch in self.channels:
            ch.close()


def connect(port: int, host: str = "127.0.0.1", label: str = "host") -> SocketChannel:
    sock = socket.create_connection((host, port), timeout=10.0)
    channel = SocketChannel(sock, label=label)
    return channel
