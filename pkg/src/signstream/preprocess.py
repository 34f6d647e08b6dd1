"""Frame decoding and tensor preparation.

Pure, stateless functions: JPEG bytes -> RGB frame -> normalized
channel-first tensor -> stacked window. The chain is resize short side to
256 (bilinear, no antialias), center crop to the configured resolution,
scale to [0, 1], then per-channel mean/std normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .core import EngineConfig
from .errors import DecodeError, FrameTooSmall, WindowSizeMismatch

RESIZE_SHORT_SIDE = 256
MIN_FRAME_SIDE = 16


@dataclass(frozen=True)
class RawFrame:
    """A decoded RGB frame with its capture bookkeeping."""

    pixels: np.ndarray  # HxWx3 uint8, RGB
    capture_index: int
    capture_time: float


def decode_frame(encoded: bytes, capture_index: int, capture_time: float) -> RawFrame:
    """Decode a baseline JPEG buffer into an RGB RawFrame.

    EXIF orientation is ignored: webcam streams carry no meaningful
    orientation, so clients must pre-rotate if they need it. Raises
    DecodeError on truncated or invalid input.
    """
    if not encoded:
        raise DecodeError("empty image buffer")
    buf = np.frombuffer(encoded, dtype=np.uint8)
    bgr = cv2.imdecode(buf, cv2.IMREAD_COLOR | cv2.IMREAD_IGNORE_ORIENTATION)
    if bgr is None:
        raise DecodeError("could not decode image buffer")
    rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
    return RawFrame(pixels=rgb, capture_index=capture_index, capture_time=capture_time)


def preprocess_frame(frame: RawFrame, cfg: EngineConfig) -> np.ndarray:
    """Turn a RawFrame into a 3xHxW float32 tensor for the model.

    Resize is done in float32 so the result is bit-deterministic and free
    of uint8 rounding. Raises FrameTooSmall below 16x16.
    """
    pixels = frame.pixels
    h, w = pixels.shape[:2]
    if h < MIN_FRAME_SIDE or w < MIN_FRAME_SIDE:
        raise FrameTooSmall(f"frame is {h}x{w}, minimum is {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}")

    scale = RESIZE_SHORT_SIDE / min(h, w)
    new_h = max(RESIZE_SHORT_SIDE, int(round(h * scale)))
    new_w = max(RESIZE_SHORT_SIDE, int(round(w * scale)))
    resized = cv2.resize(pixels.astype(np.float32), (new_w, new_h),
                         interpolation=cv2.INTER_LINEAR)

    crop_h, crop_w = cfg.input_resolution
    if crop_h > new_h or crop_w > new_w:
        # short side is fixed at 256; only oversize crop configs land here
        raise FrameTooSmall(f"crop {crop_h}x{crop_w} exceeds resized frame {new_h}x{new_w}")
    top = (new_h - crop_h) // 2
    left = (new_w - crop_w) // 2
    cropped = resized[top:top + crop_h, left:left + crop_w]

    mean = np.asarray(cfg.normalization.mean, dtype=np.float32)
    std = np.asarray(cfg.normalization.std, dtype=np.float32)
    normalized = (cropped / np.float32(255.0) - mean) / std
    return np.ascontiguousarray(normalized.transpose(2, 0, 1))


def assemble_window(frames: list[np.ndarray], window_len: int) -> np.ndarray:
    """Stack exactly window_len frame tensors into a Wx3xHxW window.

    Temporal order is preserved; slice t of the output is frames[t].
    Raises WindowSizeMismatch on any other count.
    """
    if len(frames) != window_len:
        raise WindowSizeMismatch(window_len, len(frames))
    return np.stack(frames, axis=0)
