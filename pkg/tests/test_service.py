import asyncio
import json
import threading
import time

import numpy as np
import pytest

from signstream.backend import make_mock_backend
from signstream.backend.base import Backend
from signstream.core import EngineConfig, Normalization, Vocabulary
from signstream.errors import ConfigRange, SessionClosed
from signstream.scheduler import WindowReady
from signstream.service import (
    LiveSession,
    PendingWindowQueue,
    RecognitionServer,
    serve_forever,
)

from conftest import make_jpeg


@pytest.fixture
def vocab2():
    return Vocabulary(labels=("A", "B"))


@pytest.fixture
def live_cfg():
    return EngineConfig(window_len=4, stride_fraction=0.5, avg_size=1, threshold=0.5,
                        input_resolution=(32, 32),
                        normalization=Normalization((0.5, 0.5, 0.5), (0.5, 0.5, 0.5)))


def fake_window(i):
    return WindowReady(frames=(np.zeros((3, 2, 2), dtype=np.float32),),
                       frame_start=i, frame_end=i + 3)


class SleepyBackend(Backend):
    """Uniform output after a fixed delay; models an overloaded CPU."""

    def __init__(self, num_classes, delay_s):
        super().__init__(num_classes=num_classes, output_kind="probabilities")
        self.delay_s = delay_s

    def _run(self, window):
        time.sleep(self.delay_s)
        return np.full(self.num_classes, 1.0 / self.num_classes)


class TestPendingWindowQueue:
    def test_capacity_one_drop_oldest(self):
        q = PendingWindowQueue()
        q.put(fake_window(0))
        q.put(fake_window(1))  # evicts window 0
        assert q.windows_dropped == 1
        assert q.depth == 1
        got = q.get(timeout=0.1)
        assert got.frame_start == 1  # freshest wins
        assert q.get(timeout=0.05) is None

    def test_closed_queue_rejects_put(self):
        q = PendingWindowQueue()
        q.close()
        with pytest.raises(SessionClosed):
            q.put(fake_window(0))


def collect_session(cfg, vocab, backend):
    events = []
    session = LiveSession(cfg, vocab, backend, emit=events.append)
    return session, events


def wait_for(predicate, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.01)
    return False


class TestLiveSession:
    def test_frames_to_events(self, live_cfg, vocab2):
        backend = make_mock_backend([[0.9, 0.1]], default=[0.1, 0.9])
        session, events = collect_session(live_cfg, vocab2, backend)
        try:
            frame = make_jpeg(64, 64)
            for _ in range(8):
                session.handle_frame(frame)
                time.sleep(0.02)
            assert wait_for(lambda: len(events) >= 2)
            assert [e["label"] for e in events[:2]] == ["A", "B"]
            assert events[0]["type"] == "gloss"
            assert 0.0 <= events[0]["confidence"] <= 1.0
        finally:
            session.close()

    def test_corrupt_frame_counted_not_fatal(self, live_cfg, vocab2):
        backend = make_mock_backend([[0.9, 0.1]])
        session, events = collect_session(live_cfg, vocab2, backend)
        try:
            session.handle_frame(b"not a jpeg")
            frame = make_jpeg(64, 64)
            for _ in range(4):
                session.handle_frame(frame)
            assert wait_for(lambda: session.engine.windows_inferred >= 1)
            assert session.engine.frames_dropped == 1
        finally:
            session.close()

    def test_config_update_acknowledged_and_applied(self, live_cfg, vocab2):
        backend = make_mock_backend([[0.7, 0.3]], default=[0.7, 0.3])
        session, events = collect_session(live_cfg, vocab2, backend)
        try:
            effective = session.apply_config_update({"threshold": 0.9})
            assert effective.threshold == 0.9
            frame = make_jpeg(64, 64)
            for _ in range(10):
                session.handle_frame(frame)
                time.sleep(0.02)  # let the worker keep up; no drops
            assert wait_for(lambda: session.engine.windows_inferred >= 3)
            assert events == []  # 0.7 maxima no longer clear the bar
        finally:
            session.close()

    def test_invalid_update_leaves_config_unchanged(self, live_cfg, vocab2):
        backend = make_mock_backend([[0.9, 0.1]])
        session, _ = collect_session(live_cfg, vocab2, backend)
        try:
            with pytest.raises(ConfigRange):
                session.apply_config_update({"stride_fraction": 1.5})
            assert session.engine.config.stride_fraction == 0.5
            with pytest.raises(ConfigRange):
                session.apply_config_update({"window_len": 16})  # not live-tunable
            assert session.engine.config.window_len == 4
        finally:
            session.close()

    def test_stats_shape(self, live_cfg, vocab2):
        backend = make_mock_backend([[0.9, 0.1]])
        session, _ = collect_session(live_cfg, vocab2, backend)
        try:
            stats = session.stats()
            for key in ("pred_per_sec", "frames_dropped", "windows_dropped",
                        "latency_ms", "windows_inferred"):
                assert key in stats
            assert stats["type"] == "stats"
        finally:
            session.close()

    def test_closed_session_rejects_frames(self, live_cfg, vocab2):
        backend = make_mock_backend([[0.9, 0.1]])
        session, _ = collect_session(live_cfg, vocab2, backend)
        session.close()
        with pytest.raises(SessionClosed):
            session.handle_frame(make_jpeg(64, 64))

    def test_slow_backend_drops_windows_not_frames(self, live_cfg, vocab2):
        session, _ = collect_session(live_cfg, vocab2, SleepyBackend(2, 0.5))
        try:
            frame = make_jpeg(64, 64)
            for _ in range(30):
                session.handle_frame(frame)
            assert session.engine.frames_received == 30
            assert session.max_queue_depth_seen <= 1
            assert session.queue.windows_dropped > 0
        finally:
            session.close()

    def test_session_isolation(self, live_cfg, vocab2):
        # two sessions with different configs decode like two solo runs
        script = [[0.8, 0.2], [0.8, 0.2], [0.2, 0.8], [0.2, 0.8]]
        frame = make_jpeg(64, 64)

        def run(threshold):
            session, events = collect_session(
                live_cfg.with_updates(threshold=threshold), vocab2,
                make_mock_backend(script, default=[0.5, 0.5]))
            try:
                for _ in range(10):
                    session.handle_frame(frame)
                    time.sleep(0.02)
                wait_for(lambda: session.engine.windows_inferred >= 4)
                time.sleep(0.05)
                return [e["label"] for e in events]
            finally:
                session.close()

        solo_low = run(0.5)
        solo_high = run(0.9)
        a_session, a_events = collect_session(
            live_cfg.with_updates(threshold=0.5), vocab2,
            make_mock_backend(script, default=[0.5, 0.5]))
        b_session, b_events = collect_session(
            live_cfg.with_updates(threshold=0.9), vocab2,
            make_mock_backend(script, default=[0.5, 0.5]))
        try:
            for _ in range(10):
                a_session.handle_frame(frame)
                b_session.handle_frame(frame)
                time.sleep(0.02)
            wait_for(lambda: a_session.engine.windows_inferred >= 4
                     and b_session.engine.windows_inferred >= 4)
            time.sleep(0.05)
            assert [e["label"] for e in a_events] == solo_low
            assert [e["label"] for e in b_events] == solo_high
        finally:
            a_session.close()
            b_session.close()


# ---------------------------------------------------------------------------
# WebSocket integration

async def _ws_roundtrip(port, static_dir=None):
    import websockets

    vocab = Vocabulary(labels=("A", "B"))
    cfg = EngineConfig(window_len=4, stride_fraction=0.5, avg_size=1, threshold=0.5,
                       input_resolution=(32, 32),
                       normalization=Normalization((0.5, 0.5, 0.5), (0.5, 0.5, 0.5)))
    factory = lambda: make_mock_backend([[0.9, 0.1]], default=[0.1, 0.9])
    ready = asyncio.Event()
    server_task = asyncio.create_task(serve_forever(
        cfg, vocab, factory, host="127.0.0.1", port=port,
        static_dir=static_dir, ready=ready))
    await asyncio.wait_for(ready.wait(), 5)
    out = {}
    try:
        async with websockets.connect(f"ws://127.0.0.1:{port}/session") as ws:
            hello = json.loads(await asyncio.wait_for(ws.recv(), 5))
            out["hello"] = hello
            frame = make_jpeg(64, 64)
            for _ in range(8):
                await ws.send(frame)
            # collect until we see two gloss events
            glosses = []
            while len(glosses) < 2:
                msg = json.loads(await asyncio.wait_for(ws.recv(), 5))
                if msg["type"] == "gloss":
                    glosses.append(msg)
            out["glosses"] = glosses
            await ws.send(json.dumps({"type": "config", "threshold": 0.95}))
            while True:
                msg = json.loads(await asyncio.wait_for(ws.recv(), 5))
                if msg["type"] == "config":
                    out["ack"] = msg
                    break
            await ws.send(json.dumps({"type": "config", "threshold": 2.0}))
            while True:
                msg = json.loads(await asyncio.wait_for(ws.recv(), 5))
                if msg["type"] == "error":
                    out["error"] = msg
                    break
        if static_dir is not None:
            import urllib.request

            def fetch():
                with urllib.request.urlopen(f"http://127.0.0.1:{port}/index.html",
                                            timeout=5) as r:
                    return r.read()

            out["static"] = await asyncio.wait_for(asyncio.to_thread(fetch), 10)
    finally:
        server_task.cancel()
        try:
            await server_task
        except asyncio.CancelledError:
            pass
    return out


class TestWebSocketService:
    def test_full_protocol_roundtrip(self, tmp_path):
        static = tmp_path / "ui"
        static.mkdir()
        (static / "index.html").write_text("<html>ui</html>")
        out = asyncio.run(_ws_roundtrip(port=8791, static_dir=str(static)))
        hello = out["hello"]
        assert hello["type"] == "hello"
        assert hello["vocab_size"] == 2
        assert hello["window_len"] == 4
        assert [g["label"] for g in out["glosses"]] == ["A", "B"]
        assert out["ack"]["effective_config"]["threshold"] == 0.95
        assert out["error"]["code"] == "ConfigRange"
        assert b"ui" in out["static"]
