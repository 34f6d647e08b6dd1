"""Numpy executor for the ONNX op subset exported classifier graphs use,
plus the production Backend built on it.

Covered ops: Conv (2-D, group 1), Relu, GlobalAveragePool, MaxPool,
AveragePool, Reshape, Flatten, Transpose, Squeeze, Unsqueeze, Gemm,
MatMul, Add, Mul, ReduceMean, Softmax, Identity, Concat. Graph node order
is trusted to be topological, as the ONNX spec requires.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .base import Backend
from .onnx_lite import GraphDef, ModelDef, NodeDef, parse_model
from ..errors import (
    BackendError,
    ClassCountMismatch,
    InferShapeError,
    ModelNotFound,
    ModelShapeError,
    ParseError,
)


def _pair(value, default):
    if value is None:
        return default
    return tuple(int(v) for v in value)


def _op_conv(node, inputs):
    x, w = inputs[0], inputs[1]
    b = inputs[2] if len(inputs) > 2 else None
    if x.ndim != 4 or w.ndim != 4:
        raise BackendError(f"Conv supports 2-D convolutions only, got input rank {x.ndim}")
    if node.attrs.get("group", 1) != 1:
        raise BackendError("grouped Conv is not supported")
    dilations = _pair(node.attrs.get("dilations"), (1, 1))
    if dilations != (1, 1):
        raise BackendError("dilated Conv is not supported")
    sh, sw = _pair(node.attrs.get("strides"), (1, 1))
    pads = _pair(node.attrs.get("pads"), (0, 0, 0, 0))
    pt, pl, pb, pr = pads
    kh, kw = w.shape[2], w.shape[3]
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    patches = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    n, c, oh, ow = patches.shape[:4]
    cols = patches.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    out = cols @ w.reshape(w.shape[0], -1).T
    if b is not None:
        out = out + b
    return out.reshape(n, oh, ow, w.shape[0]).transpose(0, 3, 1, 2)


def _op_pool(node, inputs, reducer):
    x = inputs[0]
    kh, kw = _pair(node.attrs["kernel_shape"], None)
    sh, sw = _pair(node.attrs.get("strides"), (kh, kw))
    pt, pl, pb, pr = _pair(node.attrs.get("pads"), (0, 0, 0, 0))
    pad_value = -np.inf if reducer is np.max else 0.0
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=pad_value)
    patches = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    return reducer(patches, axis=(-2, -1))


def _op_gemm(node, inputs):
    a, b = inputs[0], inputs[1]
    if node.attrs.get("transA", 0):
        a = a.T
    if node.attrs.get("transB", 0):
        b = b.T
    out = node.attrs.get("alpha", 1.0) * (a @ b)
    if len(inputs) > 2:
        out = out + node.attrs.get("beta", 1.0) * inputs[2]
    return out


def _op_reduce_mean(node, inputs):
    x = inputs[0]
    if len(inputs) > 1:  # opset >= 18 passes axes as an input
        axes = tuple(int(v) for v in inputs[1])
    else:
        axes = node.attrs.get("axes")
        axes = tuple(int(v) for v in axes) if axes is not None else None
    keepdims = bool(node.attrs.get("keepdims", 1))
    return np.mean(x, axis=axes, keepdims=keepdims)


def _op_softmax(node, inputs, opset):
    x = inputs[0]
    axis = int(node.attrs.get("axis", -1 if opset >= 13 else 1))
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _op_reshape(node, inputs):
    shape = tuple(int(v) for v in inputs[1])
    return inputs[0].reshape(shape)


def _op_flatten(node, inputs):
    axis = int(node.attrs.get("axis", 1))
    x = inputs[0]
    lead = int(np.prod(x.shape[:axis])) if axis > 0 else 1
    return x.reshape(lead, -1)


def _op_squeeze(node, inputs):
    if len(inputs) > 1:
        axes = tuple(int(v) for v in inputs[1])
    else:
        axes = node.attrs.get("axes")
    if axes is None:
        return np.squeeze(inputs[0])
    return np.squeeze(inputs[0], axis=tuple(axes))


def _op_unsqueeze(node, inputs):
    if len(inputs) > 1:
        axes = tuple(int(v) for v in inputs[1])
    else:
        axes = tuple(int(v) for v in node.attrs["axes"])
    out = inputs[0]
    for axis in sorted(axes):
        out = np.expand_dims(out, axis)
    return out


def execute_graph(model: ModelDef, feeds: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Run the graph on the given inputs; returns all graph outputs."""
    graph = model.graph
    values: dict[str, np.ndarray] = dict(graph.initializers)
    values.update(feeds)
    for node in graph.nodes:
        try:
            inputs = [values[name] for name in node.inputs if name]
        except KeyError as e:
            raise BackendError(f"node {node.name!r} input {e} not computed; graph not topological?")
        op = node.op_type
        if op == "Conv":
            out = _op_conv(node, inputs)
        elif op == "Relu":
            out = np.maximum(inputs[0], 0.0)
        elif op == "GlobalAveragePool":
            out = np.mean(inputs[0], axis=(-2, -1), keepdims=True)
        elif op == "MaxPool":
            out = _op_pool(node, inputs, np.max)
        elif op == "AveragePool":
            out = _op_pool(node, inputs, np.mean)
        elif op == "Gemm":
            out = _op_gemm(node, inputs)
        elif op == "MatMul":
            out = inputs[0] @ inputs[1]
        elif op == "Add":
            out = inputs[0] + inputs[1]
        elif op == "Mul":
            out = inputs[0] * inputs[1]
        elif op == "ReduceMean":
            out = _op_reduce_mean(node, inputs)
        elif op == "Softmax":
            out = _op_softmax(node, inputs, model.opset_version)
        elif op == "Reshape":
            out = _op_reshape(node, inputs)
        elif op == "Flatten":
            out = _op_flatten(node, inputs)
        elif op == "Transpose":
            out = np.transpose(inputs[0], node.attrs.get("perm"))
        elif op == "Squeeze":
            out = _op_squeeze(node, inputs)
        elif op == "Unsqueeze":
            out = _op_unsqueeze(node, inputs)
        elif op == "Identity":
            out = inputs[0]
        elif op == "Constant":
            out = node.attrs["value"]
        elif op == "Concat":
            out = np.concatenate(inputs, axis=int(node.attrs["axis"]))
        else:
            raise BackendError(f"unsupported op {op!r} in model graph")
        values[node.outputs[0]] = np.asarray(out)
    return {name: values[name] for name in graph.output_shapes}


class OnnxBackend(Backend):
    """Backend executing a serialized ONNX classifier over window tensors.

    Expects one model input of rank 5: (1, 3, W, H, W') for layout "cthw"
    or (1, W, 3, H, W') for "tchw", and one output of shape (1, classes).
    """

    def __init__(self, model: ModelDef, input_name: str, output_name: str,
                 input_shape: tuple, num_classes: int,
                 output_kind: str = "probabilities", input_layout: str = "cthw"):
        super().__init__(num_classes=num_classes, output_kind=output_kind)
        self._model = model
        self._input_name = input_name
        self._output_name = output_name
        self._input_shape = input_shape
        self._input_layout = input_layout

    def _run(self, window: np.ndarray) -> np.ndarray:
        # windows arrive time-first (W, 3, H, W')
        if window.ndim != 4 or window.shape[1] != 3:
            raise InferShapeError(f"window must be (W, 3, H, W'), got {window.shape}")
        if self._input_layout == "cthw":
            batch = window.transpose(1, 0, 2, 3)[np.newaxis].astype(np.float32)
        else:
            batch = window[np.newaxis].astype(np.float32)
        expected = tuple(d for d in self._input_shape if isinstance(d, int))
        got = batch.shape
        for want, have in zip(self._input_shape, got):
            if isinstance(want, int) and want != have:
                raise InferShapeError(
                    f"model expects input shape {self._input_shape}, got {got}")
        try:
            outputs = execute_graph(self._model, {self._input_name: batch})
        except BackendError:
            raise
        except Exception as e:  # runtime failures surface with their cause
            raise BackendError(f"graph execution failed: {e}") from e
        scores = outputs[self._output_name].reshape(-1)
        if not np.all(np.isfinite(scores)):
            raise BackendError("model produced non-finite scores")
        return scores


def load_onnx_backend(model_path: str, expected_classes: int,
                      output_kind: str = "probabilities",
                      input_layout: str = "cthw") -> OnnxBackend:
    """Load a serialized ONNX classifier and validate its interface.

    Raises ModelNotFound, ModelShapeError or ClassCountMismatch.
    """
    if not os.path.isfile(model_path):
        raise ModelNotFound(f"model file not found: {model_path}")
    with open(model_path, "rb") as f:
        data = f.read()
    try:
        model = parse_model(data)
    except ParseError as e:
        raise ModelShapeError(f"not a readable model file: {e}") from e

    graph = model.graph
    if len(graph.input_shapes) != 1:
        raise ModelShapeError(f"model must have exactly one input, found {len(graph.input_shapes)}")
    if len(graph.output_shapes) != 1:
        raise ModelShapeError(f"model must have exactly one output, found {len(graph.output_shapes)}")
    (input_name, input_shape), = graph.input_shapes.items()
    (output_name, output_shape), = graph.output_shapes.items()
    if len(input_shape) != 5:
        raise ModelShapeError(f"model input must be rank 5, got shape {input_shape}")
    if len(output_shape) != 2:
        raise ModelShapeError(f"model output must be rank 2 (1, classes), got {output_shape}")
    found_classes = output_shape[-1]
    if not isinstance(found_classes, int):
        raise ModelShapeError(f"model output class dimension is dynamic: {output_shape}")
    if found_classes != expected_classes:
        raise ClassCountMismatch(found_classes, expected_classes)
    return OnnxBackend(model, input_name, output_name, input_shape,
                       num_classes=found_classes, output_kind=output_kind,
                       input_layout=input_layout)
