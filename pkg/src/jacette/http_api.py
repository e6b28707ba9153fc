"""HTTP front end for a Runtime.

POST   /walker/run     {"walker", "start_node", "args"} -> {"report", "status", "elapsed_us"}
POST   /walker/inject  {"source"}                       -> {"walker"}
DELETE /walker/<name>                                   -> {"removed"}
GET    /walker                                          -> {"walkers"}
GET    /jsorc/status   (only when an orchestrator is attached)
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Optional

from .errors import (AccessDenied, BindFailure, JacetteError, JacSyntaxError, NotAWalker, NotFound,
                     ResolutionError, UnknownWalker)
from .runtime import Runtime

log = logging.getLogger(__name__)

MAX_BODY = 16 << 20


def _status_for(exc: JacetteError) -> int:
    if isinstance(exc, (UnknownWalker, NotFound)):
        return 404
    if isinstance(exc, AccessDenied):
        return 403
    if isinstance(exc, (JacSyntaxError, ResolutionError, NotAWalker)):
        return 400
    return 422


class _Handler(BaseHTTPRequestHandler):
    server: "_HTTPServer"
    protocol_version = "HTTP/1.0"

    def log_message(self, fmt: str, *args: Any) -> None:
        log.debug("%s " + fmt, self.address_string(), *args)

    def _send(self, code: int, body: Any) -> None:
        data = (json.dumps(body, ensure_ascii=False) + "\n").encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _body(self) -> Optional[dict]:
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY:
            self._send(413, {"error": {"type": "TooLarge", "message": "request body too large"}})
            return None
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, UnicodeDecodeError):
            self._send(400, {"error": {"type": "BadRequest", "message": "body is not JSON"}})
            return None
        if not isinstance(body, dict):
            self._send(400, {"error": {"type": "BadRequest", "message": "body must be a JSON object"}})
            return None
        return body

    def _guard(self, fn: Callable[[], Any]) -> None:
        with self.server.tracker:
            try:
                code, body = fn()
            except JacetteError as exc:
                code, body = _status_for(exc), {"error": exc.to_json()}
            except Exception as exc:  # keep serving whatever happens in one request
                log.exception("request failed")
                code, body = 500, {"error": {"type": type(exc).__name__, "message": str(exc)}}
            self._send(code, body)

    def do_POST(self) -> None:
        rt = self.server.runtime
        if self.path == "/walker/run":
            body = self._body()
            if body is None:
                return

            def run():
                walker, start, args = body.get("walker"), body.get("start_node"), body.get("args") or {}
                if not isinstance(walker, str) or isinstance(start, bool) or not isinstance(start, int) \
                        or not isinstance(args, dict):
                    return 400, {"error": {"type": "BadRequest",
                                           "message": "need walker string, start_node integer, args object"}}
                return 200, rt.run_walker(walker, start, args).to_json()

            self._guard(run)
        elif self.path == "/walker/inject":
            body = self._body()
            if body is None:
                return

            def inject():
                source = body.get("source")
                if not isinstance(source, str):
                    return 400, {"error": {"type": "BadRequest", "message": "need source string"}}
                return 200, {"walker": rt.inject_walker(source)}

            self._guard(inject)
        else:
            self._send(404, {"error": {"type": "NotFound", "message": f"no route {self.path}"}})

    def do_DELETE(self) -> None:
        prefix = "/walker/"
        if self.path.startswith(prefix) and len(self.path) > len(prefix):
            name = self.path[len(prefix):]

            def remove():
                self.server.runtime.remove_walker(name)
                return 200, {"removed": name}

            self._guard(remove)
        else:
            self._send(404, {"error": {"type": "NotFound", "message": f"no route {self.path}"}})

    def do_GET(self) -> None:
        if self.path == "/walker":
            self._send(200, {"walkers": self.server.runtime.registry.names()})
        elif self.path == "/jsorc/status" and self.server.orchestrator is not None:
            self._send(200, self.server.orchestrator.status())
        else:
            self._send(404, {"error": {"type": "NotFound", "message": f"no route {self.path}"}})


class _InFlight:
    """Counts requests being handled so shutdown can wait for them."""

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self.active = 0

    def __enter__(self) -> None:
        with self._cond:
            self.active += 1

    def __exit__(self, *exc) -> None:
        with self._cond:
            self.active -= 1
            self._cond.notify_all()

    def wait_idle(self, timeout: Optional[float] = None) -> bool:
        with self._cond:
            return self._cond.wait_for(lambda: self.active == 0, timeout)


class _HTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, addr, runtime: Runtime, orchestrator) -> None:
        self.runtime = runtime
        self.orchestrator = orchestrator
        self.tracker = _InFlight()
        super().__init__(addr, _Handler)


class ApiServer:
    def __init__(self, runtime: Runtime, port: int = 0, host: str = "127.0.0.1", orchestrator=None) -> None:
        try:
            self._server = _HTTPServer((host, port), runtime, orchestrator)
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> "ApiServer":
        self._thread = threading.Thread(target=self._server.serve_forever, name="http-api", daemon=True)
        self._thread.start()
        return self

    def shutdown(self, drain_timeout: float = 30.0) -> None:
        """Stop accepting, let in-flight walkers finish, close."""
        if self._thread is not None:
            self._server.shutdown()
            self._thread.join()
        self._server.tracker.wait_idle(drain_timeout)
        self._server.server_close()

    def __enter__(self) -> "ApiServer":
        return self if self._thread is not None else self.start()

    def __exit__(self, *exc) -> None:
        self.shutdown()
