"""WebSocket bridge between the simulator loop and operator consoles.

The bridge speaks JSON text frames.  Every frame has the shape::

    {"kind": <str>, "seq": <int>, "payload": {...}}

with exactly four kinds:

* ``telemetry``   -- server to client; the latest telemetry record.  When
  a slow client missed records, the frame carries an extra ``dropped``
  count so the console can mark the gap.
* ``command``     -- client to server; ``payload`` is an operator command
  dictionary (same schema as script lines).
* ``command_ack`` -- server to client; references the command's ``seq``
  in ``payload.ref_seq`` and reports ``accepted``/``reason``/``phase``.
* ``error``       -- server to client; malformed traffic never kills the
  connection, it is answered with an error frame.

``seq`` increases by one per frame per direction on each connection.
Telemetry fan-out is decoupled from the simulation: the runner only
deposits the latest record (:meth:`BridgeServer.publish_telemetry`), a
broadcaster thread emits at a fixed rate, and each connection has a
bounded outbound buffer that drops oldest telemetry first -- so a stalled
client can never block the control loop.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from typing import Callable, Optional

from websockets.exceptions import ConnectionClosed
from websockets.sync.server import Server, ServerConnection, serve

from .mission import OperatorCommand, parse_command

__all__ = ["BridgeServer", "FRAME_KINDS"]

FRAME_KINDS = ("telemetry", "command", "command_ack", "error")


class _ClientState:
    """Outbound buffer and sequence counter for one connection."""

    def __init__(self, conn: ServerConnection, buffer_size: int) -> None:
        self.conn = conn
        self.buffer_size = buffer_size
        self.frames: list[dict] = []
        self.seq = 0
        self.dropped_since_last = 0
        self.lock = threading.Lock()
        self.wakeup = threading.Condition(self.lock)
        self.closed = False

    def enqueue(self, kind: str, payload: dict, extra: Optional[dict] = None) -> None:
        with self.wakeup:
            if self.closed:
                return
            if len(self.frames) >= self.buffer_size:
                # Drop the oldest telemetry frame; acks/errors survive.
                for i, frame in enumerate(self.frames):
                    if frame["kind"] == "telemetry":
                        del self.frames[i]
                        self.dropped_since_last += 1
                        break
                else:
                    del self.frames[0]
            frame = {"kind": kind, "seq": self.seq, "payload": payload}
            if extra:
                frame.update(extra)
            if kind == "telemetry" and self.dropped_since_last:
                frame["dropped"] = self.dropped_since_last
                self.dropped_since_last = 0
            self.seq += 1
            self.frames.append(frame)
            self.wakeup.notify()

    def close(self) -> None:
        with self.wakeup:
            self.closed = True
            self.wakeup.notify()


class BridgeServer:
    """Threaded WebSocket endpoint for telemetry out, commands in."""

    def __init__(
        self,
        port: int = 8765,
        host: str = "127.0.0.1",
        rate_hz: float = 20.0,
        buffer_size: int = 64,
    ) -> None:
        if rate_hz <= 0.0:
            raise ValueError("bridge rate must be positive")
        if buffer_size < 2:
            raise ValueError("bridge buffer must hold at least two frames")
        self.host = host
        self.requested_port = port
        self.port: Optional[int] = None
        self.rate_hz = rate_hz
        self.buffer_size = buffer_size
        self._server: Optional[Server] = None
        self._server_thread: Optional[threading.Thread] = None
        self._broadcast_thread: Optional[threading.Thread] = None
        self._clients: dict[int, _ClientState] = {}
        self._clients_lock = threading.Lock()
        self._latest: Optional[dict] = None
        self._latest_lock = threading.Lock()
        self._inbound: "queue.Queue[tuple[OperatorCommand, Callable]]" = queue.Queue()
        self._stopping = threading.Event()

    # ------------------------------------------------------------------
    # lifecycle

    def start(self) -> None:
        self._server = serve(self._handler, host=self.host, port=self.requested_port)
        self.port = self._server.socket.getsockname()[1]
        self._server_thread = threading.Thread(
            target=self._server.serve_forever, name="bridge-accept", daemon=True
        )
        self._server_thread.start()
        self._broadcast_thread = threading.Thread(
            target=self._broadcast_loop, name="bridge-broadcast", daemon=True
        )
        self._broadcast_thread.start()

    def stop(self) -> None:
        self._stopping.set()
        with self._clients_lock:
            clients = list(self._clients.values())
        for client in clients:
            client.close()
        if self._server is not None:
            self._server.shutdown()
        if self._broadcast_thread is not None:
            self._broadcast_thread.join(timeout=2.0)
        if self._server_thread is not None:
            self._server_thread.join(timeout=2.0)

    # ------------------------------------------------------------------
    # runner-facing API

    def publish_telemetry(self, record: dict) -> None:
        """Deposit the newest record; never blocks on clients."""
        with self._latest_lock:
            self._latest = record

    def poll_commands(self) -> list[tuple[OperatorCommand, Callable]]:
        """Drain commands received since the last poll."""
        drained: list[tuple[OperatorCommand, Callable]] = []
        while True:
            try:
                drained.append(self._inbound.get_nowait())
            except queue.Empty:
                return drained

    @property
    def client_count(self) -> int:
        with self._clients_lock:
            return len(self._clients)

    # ------------------------------------------------------------------
    # threads

    def _broadcast_loop(self) -> None:
        period = 1.0 / self.rate_hz
        last_sent_t: object = None
        while not self._stopping.wait(period):
            with self._latest_lock:
                record = self._latest
            if record is None or record.get("t") == last_sent_t:
                continue
            last_sent_t = record.get("t")
            with self._clients_lock:
                clients = list(self._clients.values())
            for client in clients:
                client.enqueue("telemetry", record)

    def _sender_loop(self, client: _ClientState) -> None:
        while True:
            with client.wakeup:
                while not client.frames and not client.closed:
                    client.wakeup.wait(timeout=0.5)
                if client.closed and not client.frames:
                    return
                frame = client.frames.pop(0)
            try:
                client.conn.send(json.dumps(frame, separators=(",", ":")))
            except (ConnectionClosed, OSError):
                return

    def _handler(self, conn: ServerConnection) -> None:
        client = _ClientState(conn, self.buffer_size)
        with self._clients_lock:
            self._clients[id(client)] = client
        sender = threading.Thread(
            target=self._sender_loop, args=(client,),
            name="bridge-send", daemon=True,
        )
        sender.start()
        with self._latest_lock:
            latest = self._latest
        if latest is not None:
            client.enqueue("telemetry", latest)
        try:
            while not self._stopping.is_set():
                try:
                    raw = conn.recv(timeout=0.5)
                except TimeoutError:
                    continue
                self._handle_inbound(client, raw)
        except (ConnectionClosed, OSError):
            pass
        finally:
            with self._clients_lock:
                self._clients.pop(id(client), None)
            client.close()
            sender.join(timeout=2.0)

    # ------------------------------------------------------------------
    # inbound traffic

    def _handle_inbound(self, client: _ClientState, raw) -> None:
        ref_seq = None
        try:
            if isinstance(raw, bytes):
                raise ValueError("binary frames are not part of the protocol")
            message = json.loads(raw)
            if not isinstance(message, dict):
                raise ValueError("frame must be a JSON object")
            ref_seq = message.get("seq")
            if message.get("kind") != "command":
                raise ValueError(f"unexpected frame kind {message.get('kind')!r}")
            if not isinstance(ref_seq, int):
                raise ValueError("command frames need an integer 'seq'")
            command = parse_command(message.get("payload") or {})
        except (ValueError, json.JSONDecodeError) as exc:
            client.enqueue("error", {"message": str(exc), "ref_seq": ref_seq})
            return

        def ack(accepted: bool, reason: Optional[str], phase: str,
                _client=client, _ref=ref_seq) -> None:
            _client.enqueue(
                "command_ack",
                {"ref_seq": _ref, "accepted": accepted,
                 "reason": reason, "phase": phase},
            )

        self._inbound.put((command, ack))
