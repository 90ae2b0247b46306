"""Broadcast hub and transports for the robot-console protocol.

The hub stamps every outbound envelope from one global sequence counter and
fans identical frame bytes out to all subscribers. Subscribers have bounded
queues; one that falls more than the bound behind is disconnected rather than
ever blocking the simulation loop.

Transports: length-prefixed frames over plain TCP, and the same JSON bodies
as text messages over a minimal RFC 6455 WebSocket endpoint for browsers.
Inbound messages from all connections are funneled into one thread-safe
queue that the simulation loop drains at tick boundaries.
"""

from __future__ import annotations

import base64
import hashlib
import queue
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from hrcsim.geometry import Pose
from hrcsim.protocol import Envelope, FrameDecoder, decode_body, encode
from hrcsim.world import UnknownId, World

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
DEFAULT_QUEUE_LIMIT = 1024


class Timeout(TimeoutError):
    pass


class RemoteError(RuntimeError):
    pass


class Subscriber:
    """Bounded outbound queue; `transport_send` runs on the owner's thread."""

    def __init__(self, name: str, limit: int = DEFAULT_QUEUE_LIMIT):
        self.name = name
        self.limit = limit
        self._queue: deque = deque()
        self._lock = threading.Lock()
        self._ready = threading.Event()
        self.alive = True

    def offer(self, env: Envelope, frame: bytes) -> bool:
        with self._lock:
            if len(self._queue) >= self.limit:
                self.alive = False
                return False
            self._queue.append((env, frame))
            self._ready.set()
            return True

    def drain(self) -> list[tuple[Envelope, bytes]]:
        with self._lock:
            items = list(self._queue)
            self._queue.clear()
            self._ready.clear()
        return items

    def wait(self, timeout: float | None = None) -> bool:
        return self._ready.wait(timeout)


class Hub:
    """Stamps and fans out envelopes; safe to share across threads."""

    def __init__(self, queue_limit: int = DEFAULT_QUEUE_LIMIT):
        self.queue_limit = queue_limit
        self._subs: list[Subscriber] = []
        self._lock = threading.Lock()
        self._seq = 0
        self.on_drop: Callable[[Subscriber], None] | None = None

    def subscribe(self, name: str) -> Subscriber:
        sub = Subscriber(name, self.queue_limit)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscriber) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def subscribers(self) -> list[Subscriber]:
        with self._lock:
            return list(self._subs)

    def make_envelope(self, mtype: str, t: float, payload: dict, correlation_id: int | None = None) -> Envelope:
        with self._lock:
            self._seq += 1
            return Envelope(seq=self._seq, t=t, type=mtype, payload=payload, correlation_id=correlation_id)

    def broadcast(self, env: Envelope) -> None:
        frame = encode(env)
        dropped = []
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            if not sub.offer(env, frame):
                dropped.append(sub)
        for sub in dropped:
            self.unsubscribe(sub)
            if self.on_drop is not None:
                self.on_drop(sub)

    def send_to(self, sub: Subscriber, env: Envelope) -> None:
        frame = encode(env)
        if not sub.offer(env, frame):
            self.unsubscribe(sub)
            if self.on_drop is not None:
                self.on_drop(sub)


def broadcast(hub: Hub, env: Envelope) -> None:
    hub.broadcast(env)


@dataclass
class InboundMessage:
    source: "Connection"
    envelope: Envelope


class Connection:
    """One accepted client socket: reader thread feeding the inbound queue,
    writer thread draining the hub subscriber."""

    def __init__(self, sock: socket.socket, addr, hub: Hub, inbound: "queue.Queue[InboundMessage]", websocket: bool):
        self.sock = sock
        self.addr = addr
        self.hub = hub
        self.inbound = inbound
        self.websocket = websocket
        self.subscriber = hub.subscribe(f"{'ws' if websocket else 'tcp'}:{addr}")
        self.alive = True
        self._writer = threading.Thread(target=self._write_loop, daemon=True)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)

    def start(self):
        self._writer.start()
        self._reader.start()

    def close(self):
        self.alive = False
        self.hub.unsubscribe(self.subscriber)
        try:
            self.sock.close()
        except OSError:
            pass

    # -- writer ----------------------------------------------------------
    def _write_loop(self):
        try:
            while self.alive and self.subscriber.alive:
                if not self.subscriber.wait(0.2):
                    continue
                for env, frame in self.subscriber.drain():
                    if self.websocket:
                        self.sock.sendall(_ws_text_frame(frame[4:]))
                    else:
                        self.sock.sendall(frame)
        except OSError:
            pass
        finally:
            self.close()

    # -- reader ----------------------------------------------------------
    def _read_loop(self):
        try:
            if self.websocket:
                self._ws_read_loop()
            else:
                self._tcp_read_loop()
        except OSError:
            pass
        finally:
            self.close()

    def _tcp_read_loop(self):
        decoder = FrameDecoder()
        while self.alive:
            data = self.sock.recv(65536)
            if not data:
                break
            for env in decoder.feed(data):
                self.inbound.put(InboundMessage(self, env))

    def _ws_read_loop(self):
        buf = bytearray()
        while self.alive:
            data = self.sock.recv(65536)
            if not data:
                break
            buf.extend(data)
            while True:
                parsed = _ws_parse_frame(buf)
                if parsed is None:
                    break
                opcode, payload, consumed = parsed
                del buf[:consumed]
                if opcode == 0x8:  # close
                    self.alive = False
                    return
                if opcode == 0x9:  # ping -> pong
                    self.sock.sendall(_ws_frame(0xA, payload))
                    continue
                if opcode in (0x1, 0x2):
                    self.inbound.put(InboundMessage(self, decode_body(bytes(payload))))


class SocketServer:
    """Accept loop for one listening port (plain TCP or WebSocket)."""

    def __init__(self, host: str, port: int, hub: Hub, inbound: "queue.Queue[InboundMessage]", websocket: bool = False):
        self.hub = hub
        self.inbound = inbound
        self.websocket = websocket
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(8)
        self.port = self._listener.getsockname()[1]
        self.connections: list[Connection] = []
        self._alive = True
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)

    def start(self):
        self._thread.start()

    def _accept_loop(self):
        while self._alive:
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            if self.websocket:
                try:
                    _ws_handshake(sock)
                except (OSError, ValueError):
                    sock.close()
                    continue
            conn = Connection(sock, addr, self.hub, self.inbound, self.websocket)
            self.connections.append(conn)
            conn.start()

    def close(self):
        self._alive = False
        try:
            self._listener.close()
        except OSError:
            pass
        for conn in list(self.connections):
            conn.close()


# -- minimal RFC 6455 helpers ---------------------------------------------


def _ws_handshake(sock: socket.socket) -> None:
    request = b""
    while b"\r\n\r\n" not in request:
        chunk = sock.recv(4096)
        if not chunk:
            raise ValueError("client closed during handshake")
        request += chunk
        if len(request) > 65536:
            raise ValueError("oversized handshake")
    headers = {}
    for line in request.split(b"\r\n")[1:]:
        if b":" in line:
            k, _, v = line.partition(b":")
            headers[k.strip().lower()] = v.strip()
    key = headers.get(b"sec-websocket-key")
    if key is None:
        raise ValueError("not a websocket upgrade")
    accept = base64.b64encode(hashlib.sha1(key + WS_GUID.encode()).digest())
    sock.sendall(
        b"HTTP/1.1 101 Switching Protocols\r\n"
        b"Upgrade: websocket\r\nConnection: Upgrade\r\n"
        b"Sec-WebSocket-Accept: " + accept + b"\r\n\r\n"
    )


def _ws_frame(opcode: int, payload: bytes) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 65536:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


def _ws_text_frame(payload: bytes) -> bytes:
    return _ws_frame(0x1, payload)


def _ws_parse_frame(buf: bytearray):
    """Parse one client frame; returns (opcode, payload, consumed) or None."""
    if len(buf) < 2:
        return None
    opcode = buf[0] & 0x0F
    masked = bool(buf[1] & 0x80)
    length = buf[1] & 0x7F
    pos = 2
    if length == 126:
        if len(buf) < 4:
            return None
        length = struct.unpack_from(">H", buf, 2)[0]
        pos = 4
    elif length == 127:
        if len(buf) < 10:
            return None
        length = struct.unpack_from(">Q", buf, 2)[0]
        pos = 10
    mask = b"\x00\x00\x00\x00"
    if masked:
        if len(buf) < pos + 4:
            return None
        mask = bytes(buf[pos:pos + 4])
        pos += 4
    if len(buf) < pos + length:
        return None
    raw = bytes(buf[pos:pos + length])
    if masked:
        raw = bytes(b ^ mask[i % 4] for i, b in enumerate(raw))
    return opcode, raw, pos + length


# -- client sessions --------------------------------------------------------


class LoopbackSession:
    """Headless adapter: the world registry answers pose requests directly."""

    def __init__(self, world: World):
        self.world = world

    def request_object_pose(self, object_id: str, timeout: float = 1.0) -> Pose:
        try:
            return self.world.object_pose(object_id)
        except UnknownId as exc:
            raise RemoteError(f"unknown object {exc}") from None


class TcpClientSession:
    """Blocking TCP client: subscribes to broadcasts, correlates requests."""

    def __init__(self, host: str, port: int, connect_timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=connect_timeout)
        self.sock.settimeout(None)
        self._seq = 0
        self._corr = 0
        self._lock = threading.Lock()
        self._pending: dict[int, queue.Queue] = {}
        self.broadcasts: "queue.Queue[Envelope]" = queue.Queue()
        self._alive = True
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def close(self):
        self._alive = False
        try:
            self.sock.close()
        except OSError:
            pass

    def send(self, mtype: str, payload: dict, t: float = 0.0, correlation_id: int | None = None) -> int:
        with self._lock:
            self._seq += 1
            seq = self._seq
        env = Envelope(seq=seq, t=t, type=mtype, payload=payload, correlation_id=correlation_id)
        self.sock.sendall(encode(env))
        return seq

    def _read_loop(self):
        decoder = FrameDecoder()
        try:
            while self._alive:
                data = self.sock.recv(65536)
                if not data:
                    break
                for env in decoder.feed(data):
                    waiter = self._pending.get(env.correlation_id) if env.correlation_id else None
                    if waiter is not None:
                        waiter.put(env)
                    else:
                        self.broadcasts.put(env)
        except OSError:
            pass

    def request(self, mtype: str, payload: dict, timeout: float) -> Envelope:
        with self._lock:
            self._corr += 1
            corr = self._corr
        waiter: queue.Queue = queue.Queue()
        self._pending[corr] = waiter
        try:
            self.send(mtype, payload, correlation_id=corr)
            try:
                env = waiter.get(timeout=timeout)
            except queue.Empty:
                raise Timeout(f"no response to {mtype} within {timeout}s") from None
        finally:
            self._pending.pop(corr, None)
        if env.type == "error":
            raise RemoteError(env.payload.get("message", "remote error"))
        return env

    def request_object_pose(self, object_id: str, timeout: float = 1.0) -> Pose:
        env = self.request("object_pose_request", {"object_id": object_id}, timeout)
        return Pose.from_dict(env.payload["pose"])
