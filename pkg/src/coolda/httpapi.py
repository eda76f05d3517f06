"""Console HTTP API: JSON endpoints plus a server-push trace stream.

Endpoints (all bodies canonical JSON):

  GET    /instances                         list instances
  POST   /instances                         create from a definition
  GET    /instances/{id}                    snapshot
  POST   /instances/{id}/bindings           add a live binding
  DELETE /instances/{id}/bindings/{bid}     remove a live binding
  GET    /tools?url=...                     proxied fetch + describe
  GET    /instances/{id}/stream             SSE stream of trace entries

The stream tags every SSE message with the entry's trace index as the
event id; a client reconnecting with Last-Event-ID (or ?from=) is replayed
everything after that index, which is what makes gap-free resumption
possible. Traces are retained in memory for the instance's lifetime.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .errors import (
    CooldaError,
    DescribeFailed,
    EmptyBody,
    HttpStatus,
    InvalidBinding,
    InvalidDefinition,
    NetworkUnreachable,
    NotAPlugin,
    UnknownBinding,
    UnknownInstance,
)
from .model import ActivityDefinition, Binding, canonical_json
from .server import ActivityServer

logger = logging.getLogger(__name__)

SSE_WAIT = 0.5  # seconds between stream polls / heartbeats

_STATUS = {
    InvalidDefinition: 400,
    InvalidBinding: 400,
    UnknownInstance: 404,
    UnknownBinding: 404,
    NotAPlugin: 422,
    DescribeFailed: 422,
    NetworkUnreachable: 502,
    HttpStatus: 502,
    EmptyBody: 502,
}


def _error_obj(exc: Exception) -> dict:
    obj: dict = {"error": {"kind": type(exc).__name__, "detail": str(exc)}}
    violations = getattr(exc, "violations", None)
    if violations:
        obj["error"]["violations"] = [v.to_obj() for v in violations]
    return obj


class ConsoleApi:
    """HTTP facade over one ActivityServer."""

    def __init__(self, server: ActivityServer, port: int = 0, static_dir: str | Path | None = None):
        self.server = server
        self.static_dir = Path(static_dir) if static_dir else None
        api = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt: str, *args) -> None:
                logger.debug("http: " + fmt, *args)

            # ── plumbing ─────────────────────────────────────

            def _json(self, status: int, obj: dict) -> None:
                data = canonical_json(obj).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json; charset=utf-8")
                self.send_header("Content-Length", str(len(data)))
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                self.wfile.write(data)

            def _no_content(self) -> None:
                self.send_response(204)
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Content-Length", "0")
                self.end_headers()

            def _body(self) -> dict:
                length = int(self.headers.get("Content-Length", "0"))
                raw = self.rfile.read(length) if length else b"{}"
                return json.loads(raw.decode("utf-8"))

            def _fail(self, exc: Exception) -> None:
                status = 500
                for klass, code in _STATUS.items():
                    if isinstance(exc, klass):
                        status = code
                        break
                self._json(status, _error_obj(exc))

            # ── methods ──────────────────────────────────────

            def do_OPTIONS(self) -> None:  # CORS preflight for the console
                self.send_response(204)
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
                self.send_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID")
                self.send_header("Content-Length", "0")
                self.end_headers()

            def do_GET(self) -> None:
                parsed = urlparse(self.path)
                parts = [p for p in parsed.path.split("/") if p]
                try:
                    if parts == ["instances"]:
                        self._list_instances()
                    elif len(parts) == 2 and parts[0] == "instances":
                        self._json(200, api.server.snapshot(parts[1]).to_obj())
                    elif len(parts) == 3 and parts[0] == "instances" and parts[2] == "stream":
                        self._stream(parts[1], parse_qs(parsed.query))
                    elif parts[:1] == ["tools"]:
                        self._describe(parse_qs(parsed.query))
                    elif api.static_dir is not None:
                        self._static(parsed.path)
                    else:
                        self._json(404, {"error": {"kind": "NotFound", "detail": parsed.path}})
                except (BrokenPipeError, ConnectionResetError):
                    pass
                except CooldaError as exc:
                    self._fail(exc)

            def do_POST(self) -> None:
                parts = [p for p in urlparse(self.path).path.split("/") if p]
                try:
                    if parts == ["instances"]:
                        definition = ActivityDefinition.from_obj(self._body())
                        instance_id = api.server.create_activity(definition)
                        self._json(201, {"instance_id": instance_id})
                    elif len(parts) == 3 and parts[0] == "instances" and parts[2] == "bindings":
                        binding = Binding.from_obj(self._body())
                        binding_id = api.server.add_live_binding(parts[1], binding)
                        self._json(201, {"binding_id": binding_id})
                    else:
                        self._json(404, {"error": {"kind": "NotFound", "detail": self.path}})
                except (KeyError, ValueError, json.JSONDecodeError) as exc:
                    self._json(400, {"error": {"kind": "BadRequest", "detail": str(exc)}})
                except CooldaError as exc:
                    self._fail(exc)

            def do_DELETE(self) -> None:
                parts = [p for p in urlparse(self.path).path.split("/") if p]
                try:
                    if len(parts) == 4 and parts[0] == "instances" and parts[2] == "bindings":
                        api.server.remove_live_binding(parts[1], parts[3])
                        self._no_content()
                    else:
                        self._json(404, {"error": {"kind": "NotFound", "detail": self.path}})
                except CooldaError as exc:
                    self._fail(exc)

            # ── endpoint bodies ──────────────────────────────

            def _list_instances(self) -> None:
                items = []
                for iid in api.server.instance_ids():
                    snap = api.server.snapshot(iid)
                    items.append(
                        {
                            "instance_id": iid,
                            "definition_id": snap.definition_id,
                            "phase": snap.phase,
                            "seq": snap.seq,
                        }
                    )
                self._json(200, {"instances": items})

            def _describe(self, query: dict) -> None:
                urls = query.get("url")
                if not urls:
                    self._json(400, {"error": {"kind": "BadRequest", "detail": "missing url parameter"}})
                    return
                descriptor, _ = api.server.registry.describe_url(urls[0])
                self._json(200, descriptor.to_obj())

            def _stream(self, instance_id: str, query: dict) -> None:
                api.server.snapshot(instance_id)  # 404 early if unknown
                last = -1
                header = self.headers.get("Last-Event-ID")
                if header is not None:
                    last = int(header)
                elif "from" in query:
                    last = int(query["from"][0])

                self.send_response(200)
                self.send_header("Content-Type", "text/event-stream")
                self.send_header("Cache-Control", "no-store")
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                try:
                    while True:
                        entries = api.server.entries_since(instance_id, last, wait=SSE_WAIT)
                        if not entries:
                            self.wfile.write(b": keep-alive\n\n")
                            self.wfile.flush()
                            continue
                        for entry in entries:
                            chunk = f"id: {entry.idx}\nevent: trace\ndata: {canonical_json(entry.to_obj())}\n\n"
                            self.wfile.write(chunk.encode("utf-8"))
                            last = entry.idx
                        self.wfile.flush()
                except (OSError, CooldaError):
                    return  # client went away or the instance did

            def _static(self, path: str) -> None:
                assert api.static_dir is not None
                name = path.lstrip("/") or "index.html"
                target = (api.static_dir / name).resolve()
                if not str(target).startswith(str(api.static_dir.resolve())) or not target.is_file():
                    self._json(404, {"error": {"kind": "NotFound", "detail": path}})
                    return
                kind = "text/html"
                if target.suffix == ".js":
                    kind = "text/javascript"
                elif target.suffix == ".css":
                    kind = "text/css"
                data = target.read_bytes()
                self.send_response(200)
                self.send_header("Content-Type", f"{kind}; charset=utf-8")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self._httpd = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        self._httpd.daemon_threads = True
        self.port = self._httpd.server_address[1]
        self._thread = threading.Thread(target=self._httpd.serve_forever, name="console-http", daemon=True)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
