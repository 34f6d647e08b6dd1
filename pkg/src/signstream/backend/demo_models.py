"""Hand-built demo classifier graphs for smoke tests and benchmarks.

Both builders emit standard ONNX files. Weights come from a seeded RNG so
the same seed always yields the same model.
"""

from __future__ import annotations

import numpy as np

from .onnx_lite import GraphBuilder


def build_linear_model(num_classes: int, window_len: int = 32,
                       resolution: tuple[int, int] = (224, 224),
                       weights: np.ndarray | None = None,
                       bias: np.ndarray | None = None,
                       seed: int = 0) -> bytes:
    """Linear head over the mean-pooled input: out = mean(x) @ W^T + b.

    Input (1, 3, T, H, W), output (1, num_classes) logits.
    """
    rng = np.random.default_rng(seed)
    if weights is None:
        weights = rng.standard_normal((num_classes, 3)).astype(np.float32)
    if bias is None:
        bias = rng.standard_normal(num_classes).astype(np.float32)
    h, w = resolution

    g = GraphBuilder("linear-demo")
    g.add_initializer("fc_w", np.asarray(weights, dtype=np.float32))
    g.add_initializer("fc_b", np.asarray(bias, dtype=np.float32))
    g.add_node("ReduceMean", ["input"], ["pooled"], axes=(2, 3, 4), keepdims=0)
    g.add_node("Gemm", ["pooled", "fc_w", "fc_b"], ["output"], transB=1)
    return g.serialize("input", (1, 3, window_len, h, w), "output", (1, num_classes))


def build_conv_model(num_classes: int, window_len: int = 32,
                     resolution: tuple[int, int] = (224, 224),
                     channels: int = 8, seed: int = 0) -> bytes:
    """Small conv+pool+linear graph over a (1, 3, T, H, W) window.

    Frames are folded into the batch axis, passed through one strided
    conv, pooled globally, averaged over time and classified. Cheap enough
    for real-time CPU execution while exercising a real conv workload.
    """
    rng = np.random.default_rng(seed)
    h, w = resolution
    kernel, stride = 8, 8
    conv_w = (rng.standard_normal((channels, 3, kernel, kernel)) * 0.05).astype(np.float32)
    conv_b = (rng.standard_normal(channels) * 0.05).astype(np.float32)
    fc_w = (rng.standard_normal((num_classes, channels)) * 0.5).astype(np.float32)
    fc_b = (rng.standard_normal(num_classes) * 0.1).astype(np.float32)

    g = GraphBuilder("conv-demo")
    g.add_initializer("frames_shape", np.asarray([-1, 3, h, w], dtype=np.int64))
    g.add_initializer("time_shape", np.asarray([1, window_len, channels], dtype=np.int64))
    g.add_initializer("conv_w", conv_w)
    g.add_initializer("conv_b", conv_b)
    g.add_initializer("fc_w", fc_w)
    g.add_initializer("fc_b", fc_b)

    # (1, 3, T, H, W) -> (T, 3, H, W)
    g.add_node("Transpose", ["input"], ["time_major"], perm=(0, 2, 1, 3, 4))
    g.add_node("Reshape", ["time_major", "frames_shape"], ["frames"])
    g.add_node("Conv", ["frames", "conv_w", "conv_b"], ["conv_out"],
               strides=(stride, stride), kernel_shape=(kernel, kernel))
    g.add_node("Relu", ["conv_out"], ["act"])
    g.add_node("GlobalAveragePool", ["act"], ["pooled"])
    g.add_node("Reshape", ["pooled", "time_shape"], ["per_frame"])
    g.add_node("ReduceMean", ["per_frame"], ["clip_feat"], axes=(1,), keepdims=0)
    g.add_node("Gemm", ["clip_feat", "fc_w", "fc_b"], ["output"], transB=1)
    return g.serialize("input", (1, 3, window_len, h, w), "output", (1, num_classes))
