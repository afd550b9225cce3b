"""Length-delimited message transport for the tool protocol.

Every message is one UTF-8 JSON document framed as::

    <decimal byte length>\\n<payload bytes>

The same framing runs over standard input/output and over a TCP listener;
each connection carries any number of request/response frames.  Malformed
JSON is answered with a parse error (id null) so that every frame gets
exactly one response.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import sys

from .agent import PARSE_ERROR, ToolServer

logger = logging.getLogger(__name__)

MAX_FRAME_BYTES = 16 * 1024 * 1024


def write_frame(stream, payload: bytes) -> None:
    stream.write(f"{len(payload)}\n".encode("ascii"))
    stream.write(payload)
    stream.flush()


def read_frame(stream) -> bytes | None:
    """Read one frame; None on a clean EOF."""
    header = b""
    while True:
        ch = stream.read(1)
        if not ch:
            if header:
                raise ValueError("EOF inside frame header")
            return None
        if ch == b"\n":
            break
        header += ch
        if len(header) > 20:
            raise ValueError("unterminated frame header")
    length = int(header)
    if not 0 <= length <= MAX_FRAME_BYTES:
        raise ValueError(f"bad frame length {length}")
    payload = b""
    while len(payload) < length:
        chunk = stream.read(length - len(payload))
        if not chunk:
            raise ValueError("EOF inside frame payload")
        payload += chunk
    return payload


def encode_message(message: dict) -> bytes:
    return json.dumps(message, sort_keys=True).encode("utf-8")


def handle_payload(server: ToolServer, payload: bytes) -> dict:
    try:
        message = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        return {"id": None,
                "error": {"code": PARSE_ERROR, "message": f"parse error: {exc}"}}
    return server.handle(message)


def serve_stream(server: ToolServer, rx, tx) -> None:
    """Answer frames from rx on tx until EOF."""
    while True:
        try:
            payload = read_frame(rx)
        except ValueError as exc:
            logger.warning("dropping connection: %s", exc)
            return
        if payload is None:
            return
        response = handle_payload(server, payload)
        write_frame(tx, encode_message(response))


def serve_stdio(server: ToolServer) -> None:
    serve_stream(server, sys.stdin.buffer, sys.stdout.buffer)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        rx = self.request.makefile("rb")
        tx = self.request.makefile("wb")
        try:
            serve_stream(self.server.tool_server, rx, tx)
        finally:
            rx.close()
            tx.close()


class ToolTCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], tool_server: ToolServer):
        super().__init__(address, _Handler)
        self.tool_server = tool_server


def serve_tcp(server: ToolServer, host: str, port: int) -> None:
    with ToolTCPServer((host, port), server) as tcp:
        logger.info("tool server listening on %s:%d", *tcp.server_address)
        try:
            tcp.serve_forever()
        except KeyboardInterrupt:
            logger.info("interrupt received, shutting down")


def request_once(host: str, port: int, message: dict, timeout: float = 10.0) -> dict:
    """Client helper: send one request over TCP and await its response."""
    with socket.create_connection((host, port), timeout=timeout) as sock:
        rx = sock.makefile("rb")
        tx = sock.makefile("wb")
        write_frame(tx, encode_message(message))
        payload = read_frame(rx)
    if payload is None:
        raise ConnectionError("server closed the connection without a response")
    return json.loads(payload.decode("utf-8"))
