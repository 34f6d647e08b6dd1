"""Recognition engine: frame-skip filter, window scheduling, inference and
decoding wired into one per-session pipeline.

One engine instance per recognition session. The engine is deterministic:
identical (frame stream, config, backend) yields an identical transcript
and prediction log.
"""

from __future__ import annotations

import time
from typing import Optional

import numpy as np

from .backend import Backend
from .core import EngineConfig, GlossEvent, Vocabulary, check_prob_vector
from .decoder import DecoderState, PredictionRecord, Transcript, softmax
from .errors import ClassCountMismatch
from .preprocess import RawFrame, decode_frame, preprocess_frame
from .scheduler import FrameRing, WindowReady, hop_frames


class RecognitionEngine:
    def __init__(self, config: EngineConfig, vocab: Vocabulary, backend: Backend):
        if backend.num_classes != vocab.size:
            raise ClassCountMismatch(backend.num_classes, vocab.size)
        self.config = config
        self.vocab = vocab
        self.backend = backend
        self.ring = FrameRing(config.window_len)
        self.decoder = DecoderState(vocab, config.avg_size, config.threshold)
        self.transcript = Transcript()
        self.prediction_log: list[PredictionRecord] = []
        # counters
        self.frames_received = 0
        self.frames_dropped = 0
        self.frames_retained = 0
        self.windows_inferred = 0
        self.events_emitted = 0
        self.predictions_gated = 0
        self.last_overhead_ms = 0.0
        self.total_overhead_ms = 0.0

    # --- configuration -------------------------------------------------

    def update_params(self, threshold: Optional[float] = None,
                      avg_size: Optional[int] = None,
                      stride_fraction: Optional[float] = None) -> EngineConfig:
        """Apply a live update of the tunable trio; returns the new config.

        Validation happens via EngineConfig construction, so an
        out-of-range value raises ConfigRange and leaves state untouched.
        """
        updates = {}
        if threshold is not None:
            updates["threshold"] = threshold
        if avg_size is not None:
            updates["avg_size"] = avg_size
        if stride_fraction is not None:
            updates["stride_fraction"] = stride_fraction
        new_config = self.config.with_updates(**updates)
        self.config = new_config
        self.decoder.set_params(avg_size=avg_size, threshold=threshold)
        return new_config

    @property
    def hop(self) -> int:
        return hop_frames(self.config.window_len, self.config.stride_fraction)

    # --- frame path -----------------------------------------------------

    def ingest_encoded(self, encoded: bytes, capture_time: Optional[float] = None
                       ) -> Optional[WindowReady]:
        """Decode one JPEG frame and run the frame path.

        Decode failures drop the frame (counted) and the session goes on.
        """
        index = self.frames_received
        self.frames_received += 1
        try:
            raw = decode_frame(encoded, index, capture_time if capture_time is not None
                               else time.monotonic())
        except Exception:
            self.frames_dropped += 1
            return None
        return self.ingest_raw(raw)

    def ingest_raw(self, frame: RawFrame) -> Optional[WindowReady]:
        """Frame-skip filter -> preprocess -> ring push."""
        if frame.capture_index % self.config.frame_skip != 0:
            return None
        tensor = preprocess_frame(frame, self.config)
        return self.ingest_tensor(tensor, frame.capture_index)

    def ingest_tensor(self, tensor: np.ndarray, capture_index: int) -> Optional[WindowReady]:
        self.frames_retained += 1
        return self.ring.push(tensor, capture_index, self.hop)

    # --- window path ----------------------------------------------------

    def process_window(self, window: WindowReady) -> list[GlossEvent]:
        """Infer one window and decode it into zero or more events.

        Tracks per-window engine overhead (everything except backend
        inference) for the real-time budget.
        """
        start = time.perf_counter()
        stacked = np.stack(window.frames, axis=0)
        infer_start = time.perf_counter()
        scores = self.backend.infer(stacked)
        infer_ms = (time.perf_counter() - infer_start) * 1000.0
        self.windows_inferred += 1

        if self.backend.output_kind == "logits":
            probs = softmax(scores)
        else:
            probs = check_prob_vector(scores, num_classes=self.vocab.size)
        record = PredictionRecord(
            window_ordinal=len(self.prediction_log),
            frame_start=window.frame_start,
            frame_end=window.frame_end,
            probs=probs,
        )
        self.prediction_log.append(record)

        smoothed = self.decoder.smooth(record)
        gated = self.decoder.gate(smoothed)
        if gated is not None:
            self.predictions_gated += 1
        event = self.decoder.collapse(gated, record.frame_start, record.frame_end)
        events: list[GlossEvent] = []
        if event is not None:
            self.transcript.append(event)
            self.events_emitted += 1
            events.append(event)
        self.last_overhead_ms = (time.perf_counter() - start) * 1000.0 - infer_ms
        self.total_overhead_ms += self.last_overhead_ms
        return events

    def feed_encoded(self, encoded: bytes) -> list[GlossEvent]:
        """Synchronous convenience path: ingest one frame, process any
        resulting window inline (offline evaluation uses this)."""
        window = self.ingest_encoded(encoded)
        return self.process_window(window) if window is not None else []
