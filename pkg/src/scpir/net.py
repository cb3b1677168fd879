"""Serve one database over TCP and query it remotely.

Every frame is a 4-byte big-endian length followed by the payload.  A request
payload is a binary query (see ``wire``).  A response payload starts with a
status byte: ``0`` followed by a binary answer, ``1`` (malformed request) or
``2`` (the query addresses a chunk this database does not hold) followed by
a UTF-8 message.  The connection stays open after an error, except after
an oversized or truncated frame, where the stream cannot be resynchronised.
"""

from __future__ import annotations

import socket
import socketserver
import struct
import tempfile
import threading
from contextlib import contextmanager
from os import PathLike
from pathlib import Path

from .core import Parameters
from .placement import Placement, StorageContent, load_placement, save_placement
from .protocol import Answer, ProtocolViolation, Query, answer
from .wire import WireError, decode_answer, decode_query, encode_answer, encode_query

OK, MALFORMED, VIOLATION = 0, 1, 2
MAX_FRAME = 1 << 26

_LEN = struct.Struct(">I")


class RemoteError(RuntimeError):
    def __init__(self, code: int, message: str):
        super().__init__(f"remote error {code}: {message}")
        self.code = code
        self.message = message


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        part = sock.recv(n - len(buf))
        if not part:
            return None
        buf += part
    return bytes(buf)


def send_frame(sock: socket.socket, payload: bytes) -> None:
    sock.sendall(_LEN.pack(len(payload)) + payload)


def recv_frame(sock: socket.socket) -> bytes | None:
    """Next payload, or ``None`` on a clean close."""
    head = _recv_exact(sock, _LEN.size)
    if head is None:
        return None
    (n,) = _LEN.unpack(head)
    if n > MAX_FRAME:
        raise WireError(f"frame of {n} bytes exceeds limit {MAX_FRAME}")
    body = _recv_exact(sock, n)
    if body is None:
        raise WireError("connection closed inside a frame")
    return body


def handle_payload(payload: bytes, params: Parameters, storage: StorageContent) -> bytes:
    """Turn one request payload into one response payload."""
    try:
        q = decode_query(payload, params)
    except WireError as exc:
        return bytes([MALFORMED]) + str(exc).encode()
    try:
        a = answer(q, storage)
    except ProtocolViolation as exc:
        return bytes([VIOLATION]) + str(exc).encode()
    return bytes([OK]) + encode_answer(a)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        srv = self.server
        while True:
            try:
                payload = recv_frame(self.request)
            except WireError as exc:
                # the stream cannot be resynchronised after a bad length
                send_frame(self.request, bytes([MALFORMED]) + str(exc).encode())
                return
            except OSError:
                return
            if payload is None:
                return
            send_frame(self.request, handle_payload(payload, srv.params, srv.storage))


class DatabaseServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, placement: Placement, db_index: int, address=("127.0.0.1", 0)):
        self.params = placement.params
        self.storage = placement.storage(db_index)
        self.db_index = db_index
        super().__init__(address, _Handler)

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must look like host:port, got {endpoint!r}")
    return host, int(port)


def serve_database(db_index: int, placement_file: str | PathLike, endpoint: str = "127.0.0.1:0",
                   ready=None) -> None:
    """Answer queries for ``DB_{db_index}`` until interrupted."""
    placement = load_placement(placement_file)
    if not 1 <= db_index <= placement.params.N:
        raise ValueError(f"db index {db_index} outside 1..{placement.params.N}")
    with DatabaseServer(placement, db_index, parse_endpoint(endpoint)) as srv:
        if ready is not None:
            ready(srv.endpoint)
        srv.serve_forever()


class DatabaseClient:
    """A persistent connection to one database server."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.sock = socket.create_connection(parse_endpoint(endpoint), timeout=timeout)

    def request(self, payload: bytes) -> bytes:
        send_frame(self.sock, payload)
        resp = recv_frame(self.sock)
        if resp is None:
            raise ConnectionError(f"{self.endpoint} closed the connection")
        return resp

    def query(self, q: Query, params: Parameters) -> Answer:
        resp = self.request(encode_query(q, params))
        if not resp:
            raise RemoteError(MALFORMED, "empty response")
        if resp[0] != OK:
            raise RemoteError(resp[0], resp[1:].decode(errors="replace"))
        return decode_answer(resp[1:])

    def close(self) -> None:
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def query_remote(endpoint: str, q: Query, params: Parameters) -> Answer:
    with DatabaseClient(endpoint) as c:
        return c.query(q, params)


class LocalCluster:
    """``N`` database servers on loopback, one thread each, sharing one placement file."""

    def __init__(self, placement: Placement, table, workdir: str | PathLike | None = None):
        self._tmp = None
        if workdir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="scpir-")
            workdir = self._tmp.name
        self.placement_file = Path(workdir) / "placement.bin"
        save_placement(self.placement_file, table, placement.params)
        loaded = load_placement(self.placement_file)
        self.servers = [DatabaseServer(loaded, n) for n in range(1, loaded.params.N + 1)]
        self.threads = [threading.Thread(target=s.serve_forever, args=(0.01,), daemon=True) for s in self.servers]
        for th in self.threads:
            th.start()

    @property
    def endpoints(self) -> list[str]:
        return [s.endpoint for s in self.servers]

    def close(self) -> None:
        for s in self.servers:
            s.shutdown()
            s.server_close()
        if self._tmp is not None:
            self._tmp.cleanup()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@contextmanager
def remote_answerer(endpoints: list[str], params: Parameters):
    """Yield ``f(query) -> Answer`` that sends each query only to its own database."""
    if len(endpoints) != params.N:
        raise ValueError(f"need {params.N} endpoints, got {len(endpoints)}")
    clients = [DatabaseClient(e) for e in endpoints]
    try:
        yield lambda q: clients[q.db_index - 1].query(q, params)
    finally:
        for c in clients:
            c.close()
