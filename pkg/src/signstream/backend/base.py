"""Uniform inference interface over a window tensor.

A Backend is used from one thread at a time; the engine serializes calls
per session. Per-call latency is measured here so the service layer can
report a moving average.
"""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from collections import deque

import numpy as np

LATENCY_WINDOW = 20  # calls kept for the moving average


class Backend(ABC):
    """Pluggable inference engine: window tensor in, score vector out."""

    num_classes: int
    output_kind: str  # "logits" or "probabilities"

    def __init__(self, num_classes: int, output_kind: str):
        self.num_classes = num_classes
        self.output_kind = output_kind
        self._latencies_ms: deque = deque(maxlen=LATENCY_WINDOW)

    def infer(self, window: np.ndarray) -> np.ndarray:
        """Run one window; returns a float64 vector of length num_classes.

        Never mutates the input window. Deterministic for a fixed model
        and input.
        """
        start = time.perf_counter()
        scores = self._run(window)
        self._latencies_ms.append((time.perf_counter() - start) * 1000.0)
        return np.asarray(scores, dtype=np.float64).reshape(-1)

    @abstractmethod
    def _run(self, window: np.ndarray) -> np.ndarray:
        ...

    def reset(self) -> None:
        """Rewind any call-ordering state (no-op for stateless backends)."""

    @property
    def last_latency_ms(self) -> float:
        return self._latencies_ms[-1] if self._latencies_ms else 0.0

    @property
    def mean_latency_ms(self) -> float:
        if not self._latencies_ms:
            return 0.0
        return sum(self._latencies_ms) / len(self._latencies_ms)
