import struct

import cv2
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signstream.core import EngineConfig, Normalization
from signstream.errors import DecodeError, FrameTooSmall, WindowSizeMismatch
from signstream.preprocess import (
    RawFrame,
    assemble_window,
    decode_frame,
    preprocess_frame,
)

from conftest import make_jpeg


def raw(pixels, index=0):
    return RawFrame(pixels=pixels, capture_index=index, capture_time=0.0)


class TestDecodeFrame:
    def test_valid_jpeg(self):
        frame = decode_frame(make_jpeg(480, 640), capture_index=3, capture_time=1.5)
        assert frame.pixels.shape == (480, 640, 3)
        assert frame.pixels.dtype == np.uint8
        assert frame.capture_index == 3

    def test_rgb_channel_order(self):
        # pure red in RGB must come back with channel 0 dominant
        frame = decode_frame(make_jpeg(64, 64, color=(255, 0, 0)), 0, 0.0)
        assert frame.pixels[..., 0].mean() > 200
        assert frame.pixels[..., 2].mean() < 60

    def test_empty_buffer(self):
        with pytest.raises(DecodeError):
            decode_frame(b"", 0, 0.0)

    def test_truncated_jpeg(self):
        with pytest.raises(DecodeError):
            decode_frame(make_jpeg()[:40], 0, 0.0)

    def test_exif_orientation_ignored(self):
        plain = make_jpeg(48, 64, color=(10, 200, 30))
        # splice an APP1/EXIF segment with orientation=6 (rotate 90 CW)
        tiff = (b"II*\x00\x08\x00\x00\x00"
                + struct.pack("<H", 1)
                + struct.pack("<HHI4s", 0x0112, 3, 1, struct.pack("<HH", 6, 0))
                + struct.pack("<I", 0))
        payload = b"Exif\x00\x00" + tiff
        app1 = b"\xff\xe1" + struct.pack(">H", len(payload) + 2) + payload
        tagged = plain[:2] + app1 + plain[2:]
        a = decode_frame(plain, 0, 0.0)
        b = decode_frame(tagged, 0, 0.0)
        assert b.pixels.shape == (48, 64, 3)  # unrotated
        np.testing.assert_array_equal(a.pixels, b.pixels)


def oracle_preprocess(pixels, cfg):
    """Independent reference chain: bilinear resize (half-pixel sampling,
    no antialias), center crop, scale, normalize. float64 throughout."""
    h, w = pixels.shape[:2]
    scale = 256 / min(h, w)
    new_h, new_w = int(round(h * scale)), int(round(w * scale))
    src = pixels.astype(np.float64)
    ys = (np.arange(new_h) + 0.5) * (h / new_h) - 0.5
    xs = (np.arange(new_w) + 0.5) * (w / new_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - np.floor(ys), 0.0, 1.0)
    wx = np.clip(xs - np.floor(xs), 0.0, 1.0)
    wy = np.where(ys < 0, 0.0, wy)[:, None, None]
    wx = np.where(xs < 0, 0.0, wx)[None, :, None]
    top = src[y0][:, x0] * (1 - wx) + src[y0][:, x1] * wx
    bot = src[y1][:, x0] * (1 - wx) + src[y1][:, x1] * wx
    resized = top * (1 - wy) + bot * wy
    ch, cw = cfg.input_resolution
    t, l = (new_h - ch) // 2, (new_w - cw) // 2
    crop = resized[t:t + ch, l:l + cw]
    mean = np.asarray(cfg.normalization.mean)
    std = np.asarray(cfg.normalization.std)
    return ((crop / 255.0 - mean) / std).transpose(2, 0, 1)


class TestPreprocessFrame:
    def test_uniform_gray_closed_form(self, config):
        pixels = np.full((480, 640, 3), 128, dtype=np.uint8)
        tensor = preprocess_frame(raw(pixels), config)
        assert tensor.shape == (3, 32, 32)
        expected = (128 / 255 - 0.5) / 0.5  # 0.00392...
        np.testing.assert_allclose(tensor, expected, atol=1e-6)

    def test_mean_equal_to_frame_gives_zero_tensor(self):
        cfg = EngineConfig(window_len=4, stride_fraction=0.5, avg_size=1, threshold=0.5,
                           input_resolution=(32, 32),
                           normalization=Normalization(mean=(0.2, 0.4, 0.6),
                                                       std=(0.5, 0.5, 0.5)))
        color = np.round(np.array([0.2, 0.4, 0.6]) * 255).astype(np.uint8)
        pixels = np.tile(color, (300, 400, 1))
        tensor = preprocess_frame(raw(pixels), cfg)
        np.testing.assert_allclose(tensor, 0.0, atol=2e-3)  # uint8 quantization only

    def test_matches_independent_oracle(self, config):
        rng = np.random.default_rng(42)
        pixels = rng.integers(0, 256, size=(480, 640, 3), dtype=np.uint8)
        tensor = preprocess_frame(raw(pixels), config)
        golden = oracle_preprocess(pixels, config)
        assert np.abs(tensor - golden).max() < 1e-3

    def test_oracle_upscale_path(self, config):
        rng = np.random.default_rng(7)
        pixels = rng.integers(0, 256, size=(120, 160, 3), dtype=np.uint8)
        tensor = preprocess_frame(raw(pixels), config)
        golden = oracle_preprocess(pixels, config)
        assert np.abs(tensor - golden).max() < 1e-3

    def test_deterministic(self, config):
        rng = np.random.default_rng(0)
        pixels = rng.integers(0, 256, size=(200, 320, 3), dtype=np.uint8)
        a = preprocess_frame(raw(pixels), config)
        b = preprocess_frame(raw(pixels.copy()), config)
        np.testing.assert_array_equal(a, b)

    def test_too_small_frame_rejected(self, config):
        with pytest.raises(FrameTooSmall):
            preprocess_frame(raw(np.zeros((8, 8, 3), dtype=np.uint8)), config)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1),
           h=st.integers(16, 300), w=st.integers(16, 300))
    def test_output_always_finite(self, seed, h, w):
        cfg = EngineConfig(window_len=4, stride_fraction=0.5, avg_size=1,
                           threshold=0.5, input_resolution=(32, 32))
        rng = np.random.default_rng(seed)
        pixels = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        tensor = preprocess_frame(raw(pixels), cfg)
        assert np.all(np.isfinite(tensor))


class TestAssembleWindow:
    def test_shape_contract(self):
        frames = [np.full((3, 8, 8), t, dtype=np.float32) for t in range(32)]
        window = assemble_window(frames, 32)
        assert window.shape == (32, 3, 8, 8)

    def test_wrong_count_rejected(self):
        frames = [np.zeros((3, 8, 8), dtype=np.float32)] * 31
        with pytest.raises(WindowSizeMismatch):
            assemble_window(frames, 32)

    def test_temporal_order_preserved(self):
        frames = [np.full((3, 4, 4), t, dtype=np.float32) for t in range(32)]
        window = assemble_window(frames, 32)
        np.testing.assert_array_equal(window[5], frames[5])

    def test_permutation_changes_output(self):
        frames = [np.full((3, 4, 4), t, dtype=np.float32) for t in range(8)]
        ordered = assemble_window(frames, 8)
        permuted = assemble_window(frames[::-1], 8)
        assert not np.array_equal(ordered, permuted)
