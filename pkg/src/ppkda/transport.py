"""Wire framing and message channels.

Frames are a 4-byte big-endian length prefix followed by a UTF-8 JSON
payload, capped at 16 MiB.  Two channel flavors carry the same message
dicts: an in-memory loopback (queue pair) and TCP sockets.  Protocol
engines only ever see JSON-ready dicts, so the two are interchangeable.
"""

from __future__ import annotations

import json
import queue
import socket
import struct
import threading
import time
from typing import Any, Callable, Protocol

from .errors import ConnectionClosed, FrameTooLarge, MalformedPayload

MAX_FRAME_BYTES = 16 * 1024 * 1024
_LEN = struct.Struct(">I")


def send_frame(sock: socket.socket, payload: dict[str, Any]) -> None:
    data = json.dumps(payload, separators=(",", ":")).encode("utf-8")
    if len(data) > MAX_FRAME_BYTES:
        raise FrameTooLarge(f"payload of {len(data)} bytes exceeds 16 MiB")
    sock.sendall(_LEN.pack(len(data)) + data)


def recv_frame(sock: socket.socket) -> dict[str, Any]:
    header = _recv_exact(sock, _LEN.size)
    (length,) = _LEN.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise FrameTooLarge(f"announced frame of {length} bytes exceeds 16 MiB")
    data = _recv_exact(sock, length)
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedPayload(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise MalformedPayload("frame payload must be a JSON object")
    return payload


def _recv_exact(sock: socket.socket, length: int) -> bytes:
    chunks = []
    got = 0
    while got < length:
        chunk = sock.recv(length - got)
        if not chunk:
            raise ConnectionClosed("peer closed the stream mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


class Channel(Protocol):
    def send(self, message: dict[str, Any]) -> None: ...
    def recv(self) -> dict[str, Any]: ...
    def close(self) -> None: ...


class LoopbackChannel:
    """One endpoint of an in-memory duplex channel."""

    _CLOSE = object()

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox

    def send(self, message: dict[str, Any]) -> None:
        self._outbox.put(message)

    def recv(self) -> dict[str, Any]:
        item = self._inbox.get()
        if item is self._CLOSE:
            raise ConnectionClosed("loopback peer closed")
        return item

    def close(self) -> None:
        self._outbox.put(self._CLOSE)


def loopback_pair() -> tuple[LoopbackChannel, LoopbackChannel]:
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return LoopbackChannel(b_to_a, a_to_b), LoopbackChannel(a_to_b, b_to_a)


class SocketChannel:
    """Channel over a connected TCP socket using the frame format."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._send_lock = threading.Lock()

    def send(self, message: dict[str, Any]) -> None:
        with self._send_lock:
            send_frame(self._sock, message)

    def recv(self) -> dict[str, Any]:
        return recv_frame(self._sock)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class InstrumentedChannel:
    """Wrapper that JSON round-trips every message and records the cost.

    Used by the benchmark harness so serialization overhead can be
    reported separately from crypto time even on the loopback path.
    """

    def __init__(self, inner: Channel):
        self._inner = inner
        self.serialization_seconds = 0.0
        self.transport_wait_seconds = 0.0

    def send(self, message: dict[str, Any]) -> None:
        t0 = time.perf_counter()
        encoded = json.dumps(message, separators=(",", ":"))
        decoded = json.loads(encoded)
        self.serialization_seconds += time.perf_counter() - t0
        self._inner.send(decoded)

    def recv(self) -> dict[str, Any]:
        t0 = time.perf_counter()
        message = self._inner.recv()
        self.transport_wait_seconds += time.perf_counter() - t0
        t1 = time.perf_counter()
        message = json.loads(json.dumps(message, separators=(",", ":")))
        self.serialization_seconds += time.perf_counter() - t1
        return message

    def close(self) -> None:
        self._inner.close()


class TcpServer:
    """Accept loop spawning one handler thread per connection."""

    def __init__(self, host: str, port: int,
                 handler: Callable[[Channel], None]):
        self._handler = handler
        self._sock = socket.create_server((host, port))
        self._sock.settimeout(0.2)
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._sock.getsockname()[:2]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _addr = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            channel = SocketChannel(conn)
            threading.Thread(target=self._run_handler, args=(channel,),
                             daemon=True).start()

    def _run_handler(self, channel: Channel) -> None:
        try:
            self._handler(channel)
        except ConnectionClosed:
            pass
        finally:
            channel.close()

    def stop(self) -> None:
        self._stop.set()
        self._sock.close()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
