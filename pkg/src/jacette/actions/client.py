from __future__ import annotations

import itertools
import json
import socket
import threading
from typing import Any

from ..values import canonical


class TransportError(Exception):
    """The request could not be delivered or the reply was unreadable."""


class _Conn:
    __slots__ = ("sock", "rfile")

    def __init__(self, sock: socket.socket) -> None:
        self.sock = sock
        self.rfile = sock.makefile("rb")

    def close(self) -> None:
        try:
            self.rfile.close()
        finally:
            self.sock.close()


class RemoteClient:
    """Pooled line-protocol client for one action server endpoint."""

    def __init__(self, host: str, port: int, timeout: float = 30.0) -> None:
        self.host = host
        self.port = port
        self.timeout = timeout
        self._idle: list[_Conn] = []
        self._lock = threading.Lock()
        self._ids = itertools.count(1)

    def _acquire(self) -> _Conn:
        with self._lock:
            if self._idle:
                return self._idle.pop()
        try:
            sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        except OSError as exc:
            raise TransportError(f"connect {self.host}:{self.port}: {exc}") from exc
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return _Conn(sock)

    def _release(self, conn: _Conn) -> None:
        with self._lock:
            self._idle.append(conn)

    def request(self, action: str, args: list[Any]) -> tuple[dict[str, Any], int]:
        """Send one request; return the decoded reply and bytes on the wire."""
        rid = next(self._ids)
        line = (canonical({"id": rid, "action": action, "args": args}) + "\n").encode("utf-8")
        conn = self._acquire()
        try:
            conn.sock.sendall(line)
            reply = conn.rfile.readline()
            if not reply:
                raise TransportError("connection closed by server")
            msg = json.loads(reply)
            if msg.get("id") != rid:
                raise TransportError(f"reply id {msg.get('id')} does not match request id {rid}")
        except (OSError, ValueError, TransportError) as exc:
            conn.close()
            if isinstance(exc, TransportError):
                raise
            raise TransportError(str(exc)) from exc
        self._release(conn)
        return msg, len(line) + len(reply)

    def close(self) -> None:
        with self._lock:
            conns, self._idle = self._idle, []
        for c in conns:
            c.close()
