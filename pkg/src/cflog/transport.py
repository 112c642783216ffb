"""Length-framed message transport: in-memory pairs and TCP.

Frame: ``u32 little-endian payload length || payload``. Both channel kinds
carry identical wire bytes.
"""

from __future__ import annotations

import json
import logging
import queue
import socket
import socketserver
import struct
import threading
from typing import Protocol

from .verifier import Verifier

log = logging.getLogger(__name__)

MAX_MESSAGE = 16 * 1024 * 1024
_LEN = struct.Struct("<I")


class TransportError(IOError):
    pass


class FramingError(TransportError):
    pass


class ConnectionLost(TransportError):
    pass


class OversizeMessage(TransportError):
    pass


def frame(message: bytes) -> bytes:
    if len(message) > MAX_MESSAGE:
        raise OversizeMessage(f"{len(message)} bytes exceeds the {MAX_MESSAGE} byte limit")
    return _LEN.pack(len(message)) + message


def unframe(data: bytes) -> bytes:
    """Decode exactly one complete frame."""
    if len(data) < _LEN.size:
        raise FramingError("truncated length prefix")
    (n,) = _LEN.unpack_from(data)
    if n > MAX_MESSAGE:
        raise OversizeMessage(f"frame announces {n} bytes")
    if len(data) != _LEN.size + n:
        raise FramingError(f"frame announces {n} bytes, carries {len(data) - _LEN.size}")
    return bytes(data[_LEN.size :])


class Channel(Protocol):
    def send(self, message: bytes) -> None: ...

    def recv(self) -> bytes: ...

    def close(self) -> None: ...


class InMemoryChannel:
    """One end of a connected pair; frames travel through queues as raw bytes."""

    _EOF = object()

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue, timeout: float | None = 10.0):
        self._inbox = inbox
        self._outbox = outbox
        self.timeout = timeout
        self.closed = False

    @classmethod
    def pair(cls, timeout: float | None = 10.0) -> tuple[InMemoryChannel, InMemoryChannel]:
        a, b = queue.Queue(), queue.Queue()
        return cls(a, b, timeout), cls(b, a, timeout)

    def send(self, message: bytes) -> None:
        if self.closed:
            raise ConnectionLost("channel closed")
        self._outbox.put(frame(bytes(message)))

    def send_raw(self, data: bytes) -> None:
        """Push arbitrary bytes as one delivery (for framing tests)."""
        self._outbox.put(bytes(data))

    def recv(self) -> bytes:
        if self.closed:
            raise ConnectionLost("channel closed")
        try:
            item = self._inbox.get(timeout=self.timeout)
        except queue.Empty:
            raise ConnectionLost("receive timed out") from None
        if item is self._EOF:
            self.closed = True
            raise ConnectionLost("peer closed the channel")
        return unframe(item)

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self._outbox.put(self._EOF)


def _recv_exact(sock: socket.socket, n: int, what: str) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 16))
        if not chunk:
            if buf or what == "payload":
                raise FramingError(f"connection closed inside a frame {what}")
            raise ConnectionLost("peer closed the connection")
        buf += chunk
    return bytes(buf)


def send_frame(sock: socket.socket, message: bytes) -> None:
    try:
        sock.sendall(frame(message))
    except (BrokenPipeError, ConnectionResetError) as exc:
        raise ConnectionLost(str(exc)) from None


def recv_frame(sock: socket.socket) -> bytes:
    try:
        (n,) = _LEN.unpack(_recv_exact(sock, _LEN.size, "header"))
        if n > MAX_MESSAGE:
            raise OversizeMessage(f"frame announces {n} bytes")
        return _recv_exact(sock, n, "payload")
    except ConnectionResetError as exc:
        raise ConnectionLost(str(exc)) from None


class TcpChannel:
    def __init__(self, sock: socket.socket) -> None:
        self.sock = sock

    @classmethod
    def connect(cls, host: str, port: int, timeout: float | None = 30.0) -> TcpChannel:
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ConnectionLost(f"cannot reach {host}:{port}: {exc}") from None
        return cls(sock)

    def send(self, message: bytes) -> None:
        send_frame(self.sock, message)

    def recv(self) -> bytes:
        try:
            return recv_frame(self.sock)
        except socket.timeout:
            raise ConnectionLost("receive timed out") from None

    def close(self) -> None:
        self.sock.close()

    def __enter__(self) -> TcpChannel:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# --- attestation exchange -------------------------------------------------------
#
# device -> verifier : device id (utf-8)
# verifier -> device : REQUEST
# device -> verifier : REPORT
# verifier -> device : verdict (JSON)


def verdict_json(verdict) -> dict:
    out = {"authentic": verdict.authentic, "reason": verdict.reason, "ok": verdict.ok}
    if verdict.path is not None:
        out["entries"] = len(verdict.path)
    if verdict.cfg_result is not None:
        out["cfg_valid"] = verdict.cfg_result.valid
        out["violation_index"] = verdict.cfg_result.violation_index
    return out


def serve_session(channel: Channel, verifier: Verifier) -> dict:
    """Verifier side of one exchange over ``channel``."""
    device_id = channel.recv().decode("utf-8", "replace")
    if device_id not in verifier.devices:
        result = {"authentic": False, "reason": "UnknownDevice", "ok": False}
        channel.send(json.dumps(result).encode())
        return result
    channel.send(verifier.make_request(device_id))
    report = channel.recv()
    result = verdict_json(verifier.verify(device_id, report))
    channel.send(json.dumps(result).encode())
    log.info("device %s: %s", device_id, result)
    return result


def device_session(channel: Channel, device_id: str, device, trace) -> dict:
    """Prover side of one exchange; a rejected request ends it without a report."""
    channel.send(device_id.encode())
    request = channel.recv()
    channel.send(device.attest(request, trace))
    return json.loads(channel.recv())


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        chan = TcpChannel(self.request)
        try:
            serve_session(chan, self.server.verifier)
        except TransportError as exc:
            log.warning("session with %s ended: %s", self.client_address, exc)
        finally:
            self.server.on_session()


class VerifierServer(socketserver.ThreadingTCPServer):
    """Concurrent verifier; per-device counters are serialized inside :class:`Verifier`."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], verifier: Verifier, max_sessions: int | None = None):
        super().__init__(address, _Handler)
        self.verifier = verifier
        self.max_sessions = max_sessions
        self.sessions = 0
        self._count_lock = threading.Lock()

    def on_session(self) -> None:
        with self._count_lock:
            self.sessions += 1
            done = self.max_sessions is not None and self.sessions >= self.max_sessions
        if done:
            threading.Thread(target=self.shutdown, daemon=True).start()
