"""Score-vector decoding: softmax, adjacent-prediction averaging,
confidence gating, and duplicate collapse into a transcript.

Averaging operates on probabilities (post-softmax), not logits, so the
confidence threshold keeps its meaning across models. At stream start,
fewer than k records are averaged rather than suppressing output.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import GlossEvent, Vocabulary, check_prob_vector
from .errors import DimensionMismatch, InvalidScores


def softmax(scores: np.ndarray) -> np.ndarray:
    """Numerically stable (max-subtracted) softmax."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise InvalidScores("scores contain NaN or Inf")
    shifted = scores - scores.max()
    e = np.exp(shifted)
    return e / e.sum()


@dataclass(frozen=True)
class PredictionRecord:
    """One window's probability distribution with its frame span."""

    window_ordinal: int
    frame_start: int
    frame_end: int
    probs: np.ndarray

    def to_dict(self) -> dict:
        return {
            "window_ordinal": self.window_ordinal,
            "frame_start": self.frame_start,
            "frame_end": self.frame_end,
            "probs": [float(p) for p in self.probs],
        }


class Transcript:
    """Ordered gloss events; no two consecutive events share a gloss id."""

    def __init__(self):
        self.events: list[GlossEvent] = []

    def append(self, event: GlossEvent) -> None:
        self.events.append(event)

    def labels(self) -> list[str]:
        return [e.label for e in self.events]

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)


class DecoderState:
    """Per-session decoding state: averaging history and last emission.

    k (avg_size) and tau (threshold) may be retuned mid-stream: history is
    preserved when k grows and truncated oldest-first when it shrinks.
    Owned by one session; all calls are sequential per session.
    """

    def __init__(self, vocab: Vocabulary, avg_size: int, threshold: float):
        self.vocab = vocab
        self.avg_size = avg_size
        self.threshold = threshold
        self.history: list[PredictionRecord] = []
        self.last_emitted: Optional[int] = None

    def set_params(self, avg_size: Optional[int] = None,
                   threshold: Optional[float] = None) -> None:
        if avg_size is not None:
            self.avg_size = avg_size
            if len(self.history) > avg_size:
                self.history = self.history[-avg_size:]
        if threshold is not None:
            self.threshold = threshold

    def smooth(self, record: PredictionRecord) -> np.ndarray:
        """Append the record and return the mean of the last <= k vectors."""
        probs = check_prob_vector(record.probs)
        if self.history and len(probs) != len(self.history[-1].probs):
            raise DimensionMismatch(
                f"record has {len(probs)} classes, history has {len(self.history[-1].probs)}")
        self.history.append(record)
        if len(self.history) > self.avg_size:
            self.history = self.history[-self.avg_size:]
        return np.mean([r.probs for r in self.history], axis=0)

    def gate(self, smoothed: np.ndarray) -> Optional[tuple[int, float]]:
        """(argmax, max) if the max clears the threshold, else None.

        Ties break toward the smallest class id for determinism.
        """
        m = float(np.max(smoothed))
        if m < self.threshold:
            return None
        return int(np.argmax(smoothed)), m

    def collapse(self, gated: Optional[tuple[int, float]],
                 frame_start: int, frame_end: int,
                 emitted_at: Optional[float] = None) -> Optional[GlossEvent]:
        """Suppress consecutive duplicates; a sub-threshold gap resets.

        A deliberately repeated sign is therefore recognized twice only if
        a sub-threshold gap (or a different gloss) separates the hits.
        """
        if gated is None:
            self.last_emitted = None
            return None
        gloss_id, confidence = gated
        if gloss_id == self.last_emitted:
            return None
        self.last_emitted = gloss_id
        return GlossEvent(
            gloss_id=gloss_id,
            label=self.vocab.labels[gloss_id],
            confidence=confidence,
            frame_start=frame_start,
            frame_end=frame_end,
            emitted_at=time.monotonic() if emitted_at is None else emitted_at,
        )

    def step(self, record: PredictionRecord) -> Optional[GlossEvent]:
        """smooth -> gate -> collapse for one prediction record."""
        smoothed = self.smooth(record)
        gated = self.gate(smoothed)
        return self.collapse(gated, record.frame_start, record.frame_end)
