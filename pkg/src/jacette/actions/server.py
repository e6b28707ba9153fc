"""Remote action server: newline-delimited JSON over TCP.

Request:  {"id": <u64>, "action": <str>, "args": [...]}
Response: {"id": <u64>, "ok": true, "result": ...}
       or {"id": <u64>, "ok": false, "error": <str>}

Each connection is served in order, one response line per request line.
A line that is not JSON gets an error response with id 0 and the
connection stays open.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from typing import Any, Callable, Mapping, Optional

from ..errors import BindFailure
from ..values import canonical, validate


MAX_LINE = 16 << 20


def _response(rid: int, ok: bool, payload: Any) -> bytes:
    body = {"id": rid, "ok": ok, ("result" if ok else "error"): payload}
    return (canonical(body) + "\n").encode("utf-8")


def handle_line(line: bytes, impls: Mapping[str, Callable[..., Any]]) -> bytes:
    """Turn one request line into one response line."""
    try:
        req = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return _response(0, False, "malformed request")
    if not isinstance(req, dict):
        return _response(0, False, "malformed request")
    rid = req.get("id")
    if isinstance(rid, bool) or not isinstance(rid, int) or not 0 <= rid < 2**64:
        return _response(0, False, "invalid request: id must be an unsigned integer")
    action = req.get("action")
    args = req.get("args", [])
    if not isinstance(action, str) or not isinstance(args, list):
        return _response(rid, False, "invalid request: need action string and args array")
    impl = impls.get(action)
    if impl is None:
        return _response(rid, False, "unknown action")
    try:
        result = validate(impl(*args))
    except Exception as exc:  # the action's own failure travels back to the caller
        return _response(rid, False, f"{type(exc).__name__}: {exc}")
    return _response(rid, True, result)


class _Handler(socketserver.StreamRequestHandler):
    server: "_TCPServer"

    def handle(self) -> None:
        self.server.track(self.connection, True)
        try:
            while True:
                line = self.rfile.readline(MAX_LINE)
                if not line:
                    return
                if not line.strip():
                    continue
                reply = handle_line(line, self.server.impls)
                try:
                    self.wfile.write(reply)
                    self.wfile.flush()
                except OSError:
                    return
        finally:
            self.server.track(self.connection, False)


class _TCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = False
    block_on_close = True

    def __init__(self, addr, impls) -> None:
        self.impls = impls
        self._conns: set[socket.socket] = set()
        self._conns_lock = threading.Lock()
        super().__init__(addr, _Handler)

    def track(self, conn: socket.socket, alive: bool) -> None:
        with self._conns_lock:
            (self._conns.add if alive else self._conns.discard)(conn)

    def stop_reading(self) -> None:
        # EOF on the read side lets each handler finish its current
        # request, write the reply, and exit.
        with self._conns_lock:
            for conn in list(self._conns):
                try:
                    conn.shutdown(socket.SHUT_RD)
                except OSError:
                    pass


class ActionServer:
    """Handle for a running action server."""

    def __init__(self, impls: Mapping[str, Callable[..., Any]], port: int = 0, host: str = "127.0.0.1") -> None:
        try:
            self._server = _TCPServer((host, port), dict(impls))
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    @property
    def port(self) -> int:
        return self.address[1]

    def start(self) -> "ActionServer":
        self._thread = threading.Thread(target=self._server.serve_forever, name=f"actions:{self.port}", daemon=True)
        self._thread.start()
        return self

    def shutdown(self) -> None:
        """Stop accepting, drain in-flight requests, close."""
        if self._thread is not None:
            self._server.shutdown()
        self._server.stop_reading()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> "ActionServer":
        return self if self._thread is not None else self.start()

    def __exit__(self, *exc) -> None:
        self.shutdown()


def serve_actions(port: int, action_set: Mapping[str, Callable[..., Any]], host: str = "127.0.0.1") -> ActionServer:
    return ActionServer(action_set, port, host).start()
