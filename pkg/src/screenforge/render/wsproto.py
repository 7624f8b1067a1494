"""Minimal RFC 6455 WebSocket framing, client and server side.

The DevTools wire protocol needs only text frames over a local socket;
no websocket package is available in this environment, so the handshake
and framing live here. The server half exists for the protocol test
double.
"""

from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct
from urllib.parse import urlparse

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT, OP_TEXT, OP_BIN, OP_CLOSE, OP_PING, OP_PONG = 0x0, 0x1, 0x2, 0x8, 0x9, 0xA


class WebSocketError(Exception):
    pass


def _accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _GUID).encode()).digest()
    return base64.b64encode(digest).decode()


class WebSocket:
    """Framed messaging over an already-upgraded socket."""

    def __init__(self, sock: socket.socket, mask_outgoing: bool):
        self._sock = sock
        self._mask = mask_outgoing
        self._buf = b""
        self.closed = False

    # --- receiving ---

    def _read_exact(self, n: int) -> bytes:
        while len(self._buf) < n:
            chunk = self._sock.recv(65536)
            if not chunk:
                raise WebSocketError("socket closed mid-frame")
            self._buf += chunk
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def _read_frame(self):
        head = self._read_exact(2)
        fin = bool(head[0] & 0x80)
        opcode = head[0] & 0x0F
        masked = bool(head[1] & 0x80)
        length = head[1] & 0x7F
        if length == 126:
            length = struct.unpack(">H", self._read_exact(2))[0]
        elif length == 127:
            length = struct.unpack(">Q", self._read_exact(8))[0]
        mask = self._read_exact(4) if masked else b""
        payload = self._read_exact(length)
        if masked:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        return fin, opcode, payload

    def recv_message(self) -> str | None:
        """Next text message; None once the peer closes."""
        parts: list[bytes] = []
        opcode_msg = None
        while True:
            if self.closed:
                return None
            fin, opcode, payload = self._read_frame()
            if opcode == OP_PING:
                self._send_frame(OP_PONG, payload)
                continue
            if opcode == OP_PONG:
                continue
            if opcode == OP_CLOSE:
                if not self.closed:
                    self._send_frame(OP_CLOSE, b"")
                    self.closed = True
                return None
            if opcode in (OP_TEXT, OP_BIN):
                opcode_msg = opcode
            parts.append(payload)
            if fin:
                data = b"".join(parts)
                return data.decode("utf-8") if opcode_msg == OP_TEXT else data

    # --- sending ---

    def _send_frame(self, opcode: int, payload: bytes) -> None:
        head = bytearray([0x80 | opcode])
        mask_bit = 0x80 if self._mask else 0
        n = len(payload)
        if n < 126:
            head.append(mask_bit | n)
        elif n < 65536:
            head.append(mask_bit | 126)
            head += struct.pack(">H", n)
        else:
            head.append(mask_bit | 127)
            head += struct.pack(">Q", n)
        if self._mask:
            mask = os.urandom(4)
            head += mask
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        self._sock.sendall(bytes(head) + payload)

    def send_text(self, data: str) -> None:
        if self.closed:
            raise WebSocketError("websocket is closed")
        self._send_frame(OP_TEXT, data.encode("utf-8"))

    def close(self) -> None:
        if not self.closed:
            try:
                self._send_frame(OP_CLOSE, b"")
            except OSError:
                pass
            self.closed = True
        self._sock.close()


def connect(url: str, timeout: float = 30.0) -> WebSocket:
    """Client handshake against ws://host:port/path."""
    parsed = urlparse(url)
    if parsed.scheme != "ws":
        raise WebSocketError(f"unsupported scheme: {parsed.scheme}")
    sock = socket.create_connection(
        (parsed.hostname, parsed.port or 80), timeout=timeout)
    sock.settimeout(timeout)
    key = base64.b64encode(os.urandom(16)).decode()
    path = parsed.path or "/"
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {parsed.hostname}:{parsed.port or 80}\r\n"
        "Upgrade: websocket\r\nConnection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n\r\n"
    )
    sock.sendall(request.encode())
    response = b""
    while b"\r\n\r\n" not in response:
        chunk = sock.recv(65536)
        if not chunk:
            raise WebSocketError("handshake failed: connection closed")
        response += chunk
    head, _, rest = response.partition(b"\r\n\r\n")
    status = head.split(b"\r\n", 1)[0]
    if b"101" not in status:
        raise WebSocketError(f"handshake rejected: {status.decode(errors='replace')}")
    expected = _accept_key(key).encode()
    if expected not in head:
        raise WebSocketError("handshake failed: bad accept key")
    sock.settimeout(None)  # message timeouts are the caller's concern
    ws = WebSocket(sock, mask_outgoing=True)
    ws._buf = rest
    return ws


def accept(sock: socket.socket) -> WebSocket:
    """Server-side upgrade of a freshly accepted connection."""
    request = b""
    while b"\r\n\r\n" not in request:
        chunk = sock.recv(65536)
        if not chunk:
            raise WebSocketError("client vanished during handshake")
        request += chunk
    key = None
    for line in request.split(b"\r\n"):
        if line.lower().startswith(b"sec-websocket-key:"):
            key = line.split(b":", 1)[1].strip().decode()
    if key is None:
        raise WebSocketError("missing Sec-WebSocket-Key")
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\nConnection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {_accept_key(key)}\r\n\r\n"
    )
    sock.sendall(response.encode())
    return WebSocket(sock, mask_outgoing=False)
