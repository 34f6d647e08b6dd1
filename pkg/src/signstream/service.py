"""Live recognition service.

LiveSession is the transport-free core: non-blocking frame ingestion, a
capacity-1 pending-window queue with drop-oldest backpressure, one
inference worker thread, and live updates of the tunable trio. The
WebSocket front door in `serve_forever` wraps one LiveSession per
connection and speaks the JSON protocol documented in the README.
"""

from __future__ import annotations

import asyncio
import http
import json
import logging
import mimetypes
import os
import threading
import time
import uuid
from collections import deque
from typing import Callable, Optional

from .backend import Backend
from .core import EngineConfig, LIVE_TUNABLE_FIELDS, Vocabulary
from .engine import RecognitionEngine
from .errors import ConfigRange, SessionClosed, SignStreamError
from .scheduler import WindowReady

log = logging.getLogger(__name__)

DEFAULT_PORT = 8765
DEFAULT_MAX_SESSIONS = 4
STATS_INTERVAL_S = 1.0
RATE_WINDOW_S = 10.0  # horizon for the predictions-per-second estimate


class PendingWindowQueue:
    """Bounded queue (capacity 1) of windows awaiting inference.

    Under overload the oldest pending window is discarded so the worker
    always gets the freshest window; stale windows are worthless in a
    live conversation.
    """

    def __init__(self):
        self._cond = threading.Condition()
        self._item: Optional[WindowReady] = None
        self._closed = False
        self.windows_dropped = 0

    def put(self, window: WindowReady) -> None:
        with self._cond:
            if self._closed:
                raise SessionClosed("queue is closed")
            if self._item is not None:
                self._item = window
                self.windows_dropped += 1
            else:
                self._item = window
            self._cond.notify()

    def get(self, timeout: float = 0.2) -> Optional[WindowReady]:
        with self._cond:
            if self._item is None and not self._closed:
                self._cond.wait(timeout)
            item, self._item = self._item, None
            return item

    @property
    def depth(self) -> int:
        with self._cond:
            return 0 if self._item is None else 1

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed


class LiveSession:
    """One live recognition session: ingestion path, inference worker and
    outbound event callback, communicating via immutable messages.

    `emit` is called from the worker thread with already-serializable
    dicts; the transport layer is responsible for thread-safe delivery.
    """

    def __init__(self, config: EngineConfig, vocab: Vocabulary, backend: Backend,
                 emit: Callable[[dict], None], session_id: Optional[str] = None):
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.engine = RecognitionEngine(config, vocab, backend)
        self.queue = PendingWindowQueue()
        self._emit = emit
        self._decode_lock = threading.Lock()
        self._gated_times: deque = deque()
        self._closed = False
        self.max_queue_depth_seen = 0
        self._worker = threading.Thread(
            target=self._worker_loop, name=f"infer-{self.session_id}", daemon=True)
        self._worker.start()

    # --- ingestion path (caller's thread; never blocks on inference) ----

    def handle_frame(self, encoded: bytes) -> None:
        """Decode, skip-filter, preprocess and schedule one frame.

        Decode failures are counted and the session continues. Raises
        SessionClosed after close().
        """
        if self._closed:
            raise SessionClosed(f"session {self.session_id} is closed")
        window = self.engine.ingest_encoded(encoded)
        if window is not None:
            self.queue.put(window)
            self.max_queue_depth_seen = max(self.max_queue_depth_seen, self.queue.depth)

    def apply_config_update(self, partial: dict) -> EngineConfig:
        """Apply a partial update of {threshold, avg_size, stride_fraction}.

        Validation is the same as at startup; on failure the session
        config is unchanged. Returns the full effective config.
        """
        if self._closed:
            raise SessionClosed(f"session {self.session_id} is closed")
        unknown = [k for k in partial if k not in LIVE_TUNABLE_FIELDS]
        if unknown:
            raise ConfigRange(unknown[0], "not a live-tunable field")
        with self._decode_lock:
            return self.engine.update_params(
                threshold=partial.get("threshold"),
                avg_size=partial.get("avg_size"),
                stride_fraction=partial.get("stride_fraction"),
            )

    # --- inference worker ----------------------------------------------

    def _worker_loop(self) -> None:
        while not self.queue.closed:
            window = self.queue.get(timeout=0.2)
            if window is None:
                continue
            try:
                with self._decode_lock:
                    gated_before = self.engine.predictions_gated
                    events = self.engine.process_window(window)
                    if self.engine.predictions_gated > gated_before:
                        self._gated_times.append(time.monotonic())
                for event in events:
                    self._emit(event.to_dict())
            except SignStreamError as e:
                log.warning("session %s: window dropped after backend error: %s",
                            self.session_id, e)
                self._emit({"type": "error", "code": type(e).__name__, "detail": str(e)})

    # --- stats / teardown -----------------------------------------------

    def stats(self) -> dict:
        now = time.monotonic()
        while self._gated_times and now - self._gated_times[0] > RATE_WINDOW_S:
            self._gated_times.popleft()
        horizon = RATE_WINDOW_S
        if self._gated_times:
            horizon = min(RATE_WINDOW_S, max(now - self._gated_times[0], 1e-3))
        engine = self.engine
        return {
            "type": "stats",
            "pred_per_sec": round(len(self._gated_times) / horizon, 2),
            "frames_received": engine.frames_received,
            "frames_dropped": engine.frames_dropped,
            "windows_inferred": engine.windows_inferred,
            "windows_dropped": self.queue.windows_dropped,
            "events_emitted": engine.events_emitted,
            "latency_ms": round(engine.backend.mean_latency_ms, 1),
        }

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        self.queue.close()
        self._worker.join(timeout=5.0)

    @property
    def closed(self) -> bool:
        return self._closed


# ---------------------------------------------------------------------------
# WebSocket front door

def _hello_message(session: LiveSession, vocab: Vocabulary) -> dict:
    return {
        "type": "hello",
        "session_id": session.session_id,
        "vocab_size": vocab.size,
        "window_len": session.engine.config.window_len,
        "effective_config": session.engine.config.to_dict(),
    }


class RecognitionServer:
    """Shared state for all connections: model, vocab, config, caps."""

    def __init__(self, config: EngineConfig, vocab: Vocabulary,
                 backend_factory: Callable[[], Backend],
                 max_sessions: int = DEFAULT_MAX_SESSIONS,
                 static_dir: Optional[str] = None):
        self.config = config
        self.vocab = vocab
        self.backend_factory = backend_factory
        self.max_sessions = max_sessions
        self.static_dir = static_dir
        self.active_sessions = 0

    async def handle_connection(self, connection) -> None:
        path = connection.request.path if connection.request else "/"
        if path.split("?")[0] != "/session":
            await connection.close(code=1008, reason="connect to /session")
            return
        if self.active_sessions >= self.max_sessions:
            await connection.send(json.dumps({
                "type": "error", "code": "SessionLimit",
                "detail": f"server is at its session cap ({self.max_sessions})"}))
            await connection.close(code=1013, reason="session cap reached")
            return

        self.active_sessions += 1
        loop = asyncio.get_running_loop()

        def emit(message: dict) -> None:
            # worker thread -> event loop; ordered per session
            asyncio.run_coroutine_threadsafe(
                connection.send(json.dumps(message)), loop)

        session = LiveSession(self.config, self.vocab, self.backend_factory(),
                              emit=emit)
        log.info("session %s opened (%d active)", session.session_id, self.active_sessions)
        stats_task = asyncio.create_task(self._stats_loop(connection, session))
        try:
            await connection.send(json.dumps(_hello_message(session, self.vocab)))
            async for message in connection:
                if isinstance(message, bytes):
                    session.handle_frame(message)
                else:
                    await self._handle_text(connection, session, message)
        except Exception as e:  # dead connection: tear the session down
            log.info("session %s connection ended: %s", session.session_id, e)
        finally:
            stats_task.cancel()
            session.close()
            self.active_sessions -= 1
            log.info("session %s closed", session.session_id)

    async def _handle_text(self, connection, session: LiveSession, message: str) -> None:
        try:
            obj = json.loads(message)
        except json.JSONDecodeError:
            await connection.send(json.dumps({
                "type": "error", "code": "ParseError", "detail": "invalid JSON"}))
            return
        if obj.get("type") != "config":
            await connection.send(json.dumps({
                "type": "error", "code": "UnknownMessage",
                "detail": f"unsupported message type {obj.get('type')!r}"}))
            return
        partial = {k: v for k, v in obj.items() if k != "type"}
        try:
            effective = session.apply_config_update(partial)
        except SignStreamError as e:
            await connection.send(json.dumps({
                "type": "error", "code": type(e).__name__, "detail": str(e)}))
            return
        await connection.send(json.dumps({
            "type": "config", "effective_config": effective.to_dict()}))

    async def _stats_loop(self, connection, session: LiveSession) -> None:
        try:
            while True:
                await asyncio.sleep(STATS_INTERVAL_S)
                await connection.send(json.dumps(session.stats()))
        except asyncio.CancelledError:
            pass

    def process_request(self, connection, request):
        """Serve static assets for plain HTTP requests; pass WebSocket
        upgrades through."""
        if "websocket" in request.headers.get("Upgrade", "").lower():
            return None
        if self.static_dir is None:
            return connection.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
        rel = request.path.split("?")[0].lstrip("/") or "index.html"
        root = os.path.abspath(self.static_dir)
        full = os.path.abspath(os.path.join(root, rel))
        if not full.startswith(root + os.sep):
            return connection.respond(http.HTTPStatus.FORBIDDEN, "forbidden\n")
        if not os.path.isfile(full):
            return connection.respond(http.HTTPStatus.NOT_FOUND, "not found\n")
        from websockets.datastructures import Headers
        from websockets.http11 import Response
        with open(full, "rb") as f:
            body = f.read()
        content_type = mimetypes.guess_type(full)[0] or "application/octet-stream"
        return Response(200, "OK", Headers([
            ("Content-Type", content_type),
            ("Content-Length", str(len(body))),
            ("Connection", "close"),
        ]), body)


async def serve_forever(config: EngineConfig, vocab: Vocabulary,
                        backend_factory: Callable[[], Backend],
                        host: str = "0.0.0.0", port: int = DEFAULT_PORT,
                        max_sessions: int = DEFAULT_MAX_SESSIONS,
                        static_dir: Optional[str] = None,
                        ready: Optional[asyncio.Event] = None) -> None:
    from websockets.asyncio.server import serve

    server = RecognitionServer(config, vocab, backend_factory,
                               max_sessions=max_sessions, static_dir=static_dir)
    async with serve(server.handle_connection, host, port,
                     process_request=server.process_request,
                     max_size=16 * 1024 * 1024) as ws_server:
        log.info("listening on ws://%s:%d/session", host, port)
        if ready is not None:
            ready.set()
        await asyncio.get_running_loop().create_future()
