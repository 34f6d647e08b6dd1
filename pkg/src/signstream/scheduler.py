"""Rolling frame buffer and window scheduling.

The ring holds the last W frame tensors and emits a WindowReady snapshot
whenever the buffer is full and at least `hop` frames have arrived since
the previous emission. The first window appears exactly when the W-th
frame does; there is no stream-start padding.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import OutOfOrderFrame


def hop_frames(window_len: int, stride_fraction: float) -> int:
    """Frame hop between consecutive windows: max(1, round(s*W)).

    Rounds half away from zero. s=0.0 maps to hop 1 (a prediction every
    frame) since a literal hop of 0 would never advance.
    """
    if window_len < 1:
        raise ValueError(f"window_len must be >= 1, got {window_len}")
    if not 0.0 <= stride_fraction <= 1.0:
        raise ValueError(f"stride_fraction must be in [0, 1], got {stride_fraction}")
    return max(1, int(np.floor(stride_fraction * window_len + 0.5)))


@dataclass(frozen=True)
class WindowReady:
    """Immutable snapshot of W frame tensors ready for inference."""

    frames: tuple[np.ndarray, ...]
    frame_start: int
    frame_end: int


class FrameRing:
    """Single-writer rolling buffer of the most recent <= W frame tensors.

    Eviction is strictly oldest-first; capture indices must strictly
    increase. W and hop are measured in retained (post-frame-skip) frames.
    """

    def __init__(self, window_len: int):
        self.window_len = window_len
        self._frames: deque = deque(maxlen=window_len)
        self._indices: deque = deque(maxlen=window_len)
        self.frames_since_last_window = 0

    def __len__(self) -> int:
        return len(self._frames)

    @property
    def last_index(self) -> Optional[int]:
        return self._indices[-1] if self._indices else None

    def push(self, tensor: np.ndarray, capture_index: int, hop: int) -> Optional[WindowReady]:
        """Append a frame; return a WindowReady when a window is due.

        `hop` is passed per call so a live stride update takes effect at
        the next hop computation. Raises OutOfOrderFrame if capture_index
        does not exceed every index already buffered.
        """
        last = self.last_index
        if last is not None and capture_index <= last:
            raise OutOfOrderFrame(f"capture index {capture_index} <= last seen {last}")
        self._frames.append(tensor)
        self._indices.append(capture_index)
        self.frames_since_last_window += 1
        if len(self._frames) == self.window_len and self.frames_since_last_window >= hop:
            self.frames_since_last_window = 0
            return WindowReady(
                frames=tuple(self._frames),
                frame_start=self._indices[0],
                frame_end=self._indices[-1],
            )
        return None
