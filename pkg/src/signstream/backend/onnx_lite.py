"""Minimal ONNX model file reader/writer.

onnxruntime is not a dependency of this package; deployed model files are
parsed with a small protobuf wire-format codec covering the message subset
an exported classifier graph needs (ModelProto / GraphProto / NodeProto /
AttributeProto / TensorProto / ValueInfoProto), and executed with the
numpy interpreter in onnx_backend. The writer produces standard ONNX
protobuf files loadable by any conformant runtime.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..errors import ModelShapeError, ParseError

# TensorProto.DataType values
DT_FLOAT = 1
DT_INT64 = 7

# AttributeProto.AttributeType values
ATTR_FLOAT = 1
ATTR_INT = 2
ATTR_STRING = 3
ATTR_TENSOR = 4
ATTR_FLOATS = 6
ATTR_INTS = 7
ATTR_STRINGS = 8


# ---------------------------------------------------------------------------
# protobuf wire primitives

def _write_varint(out: bytearray, value: int) -> None:
    if value < 0:
        value += 1 << 64  # two's complement int64
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise ParseError("truncated varint in model file")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise ParseError("malformed varint in model file")


def _signed64(value: int) -> int:
    return value - (1 << 64) if value >= 1 << 63 else value


def _write_tag(out: bytearray, field_num: int, wire_type: int) -> None:
    _write_varint(out, (field_num << 3) | wire_type)


def _write_bytes_field(out: bytearray, field_num: int, payload: bytes) -> None:
    _write_tag(out, field_num, 2)
    _write_varint(out, len(payload))
    out.extend(payload)


def _write_varint_field(out: bytearray, field_num: int, value: int) -> None:
    _write_tag(out, field_num, 0)
    _write_varint(out, value)


def _parse_message(data: bytes) -> dict[int, list]:
    """Parse one message into {field_number: [values...]} preserving order.

    Length-delimited values stay as bytes; varints come back as unsigned
    ints; 32/64-bit fields as raw bytes.
    """
    fields: dict[int, list] = {}
    pos = 0
    while pos < len(data):
        key, pos = _read_varint(data, pos)
        field_num, wire_type = key >> 3, key & 0x7
        if wire_type == 0:
            value, pos = _read_varint(data, pos)
        elif wire_type == 1:
            value, pos = data[pos:pos + 8], pos + 8
        elif wire_type == 2:
            length, pos = _read_varint(data, pos)
            if pos + length > len(data):
                raise ParseError("truncated length-delimited field in model file")
            value, pos = data[pos:pos + length], pos + length
        elif wire_type == 5:
            value, pos = data[pos:pos + 4], pos + 4
        else:
            raise ParseError(f"unsupported wire type {wire_type} in model file")
        fields.setdefault(field_num, []).append((wire_type, value))
    return fields


def _ints_from_field(entries: list) -> list[int]:
    """Repeated int64: accepts both packed and unpacked encodings."""
    values: list[int] = []
    for wire_type, value in entries:
        if wire_type == 0:
            values.append(_signed64(value))
        elif wire_type == 2:
            pos = 0
            while pos < len(value):
                v, pos = _read_varint(value, pos)
                values.append(_signed64(v))
        else:
            raise ParseError("bad encoding for repeated int64 field")
    return values


def _floats_from_field(entries: list) -> list[float]:
    values: list[float] = []
    for wire_type, value in entries:
        if wire_type == 5:
            values.append(struct.unpack("<f", value)[0])
        elif wire_type == 2:
            values.extend(struct.unpack(f"<{len(value) // 4}f", value))
        else:
            raise ParseError("bad encoding for repeated float field")
    return values


def _string(entries: list) -> str:
    return entries[0][1].decode("utf-8")


# ---------------------------------------------------------------------------
# model IR

@dataclass(frozen=True)
class NodeDef:
    op_type: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    attrs: dict
    name: str = ""


@dataclass(frozen=True)
class GraphDef:
    name: str
    nodes: tuple[NodeDef, ...]
    initializers: dict[str, np.ndarray]
    input_shapes: dict[str, tuple]   # graph inputs that are not initializers
    output_shapes: dict[str, tuple]  # dims: int for static, str/None for symbolic


@dataclass(frozen=True)
class ModelDef:
    ir_version: int
    opset_version: int
    producer: str
    graph: GraphDef


def parse_model(data: bytes) -> ModelDef:
    fields = _parse_message(data)
    if 7 not in fields:
        raise ParseError("model file has no graph")
    ir_version = _ints_from_field(fields.get(1, []))
    opset = 0
    for _, raw in fields.get(8, []):
        opset_fields = _parse_message(raw)
        versions = _ints_from_field(opset_fields.get(2, []))
        domains = opset_fields.get(1, [])
        if versions and (not domains or domains[0][1] in (b"", b"ai.onnx")):
            opset = max(opset, versions[0])
    producer = _string(fields[2]) if 2 in fields else ""
    graph = _parse_graph(fields[7][0][1])
    return ModelDef(
        ir_version=ir_version[0] if ir_version else 0,
        opset_version=opset,
        producer=producer,
        graph=graph,
    )


def _parse_graph(data: bytes) -> GraphDef:
    fields = _parse_message(data)
    name = _string(fields[2]) if 2 in fields else ""
    initializers = {}
    for _, raw in fields.get(5, []):
        tname, array = _parse_tensor(raw)
        initializers[tname] = array
    nodes = tuple(_parse_node(raw) for _, raw in fields.get(1, []))
    input_shapes = {}
    for _, raw in fields.get(11, []):
        vname, shape = _parse_value_info(raw)
        if vname not in initializers:
            input_shapes[vname] = shape
    output_shapes = {}
    for _, raw in fields.get(12, []):
        vname, shape = _parse_value_info(raw)
        output_shapes[vname] = shape
    return GraphDef(name=name, nodes=nodes, initializers=initializers,
                    input_shapes=input_shapes, output_shapes=output_shapes)


def _parse_node(data: bytes) -> NodeDef:
    fields = _parse_message(data)
    attrs = {}
    for _, raw in fields.get(5, []):
        aname, value = _parse_attribute(raw)
        attrs[aname] = value
    return NodeDef(
        op_type=_string(fields[4]) if 4 in fields else "",
        inputs=tuple(v.decode("utf-8") for _, v in fields.get(1, [])),
        outputs=tuple(v.decode("utf-8") for _, v in fields.get(2, [])),
        attrs=attrs,
        name=_string(fields[3]) if 3 in fields else "",
    )


def _parse_attribute(data: bytes) -> tuple[str, object]:
    fields = _parse_message(data)
    name = _string(fields[1]) if 1 in fields else ""
    atype = _ints_from_field(fields.get(20, []))
    atype = atype[0] if atype else None
    if atype == ATTR_FLOAT or (atype is None and 2 in fields):
        return name, _floats_from_field(fields[2])[0]
    if atype == ATTR_INT or (atype is None and 3 in fields):
        return name, _ints_from_field(fields[3])[0]
    if atype == ATTR_STRING or (atype is None and 4 in fields):
        return name, fields[4][0][1].decode("utf-8")
    if atype == ATTR_TENSOR or (atype is None and 5 in fields):
        _, array = _parse_tensor(fields[5][0][1])
        return name, array
    if atype == ATTR_FLOATS or (atype is None and 7 in fields):
        return name, tuple(_floats_from_field(fields.get(7, [])))
    if atype == ATTR_INTS or (atype is None and 8 in fields):
        return name, tuple(_ints_from_field(fields.get(8, [])))
    if atype == ATTR_STRINGS or (atype is None and 9 in fields):
        return name, tuple(v.decode("utf-8") for _, v in fields.get(9, []))
    return name, None


def _parse_tensor(data: bytes) -> tuple[str, np.ndarray]:
    fields = _parse_message(data)
    name = _string(fields[8]) if 8 in fields else ""
    dims = tuple(_ints_from_field(fields.get(1, [])))
    dtype_vals = _ints_from_field(fields.get(2, []))
    dtype = dtype_vals[0] if dtype_vals else DT_FLOAT
    if 9 in fields:  # raw_data
        raw = fields[9][0][1]
        if dtype == DT_FLOAT:
            array = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        elif dtype == DT_INT64:
            array = np.frombuffer(raw, dtype="<i8").astype(np.int64)
        else:
            raise ModelShapeError(f"unsupported tensor data type {dtype}")
    elif dtype == DT_FLOAT:
        array = np.asarray(_floats_from_field(fields.get(4, [])), dtype=np.float32)
    elif dtype == DT_INT64:
        array = np.asarray(_ints_from_field(fields.get(7, [])), dtype=np.int64)
    else:
        raise ModelShapeError(f"unsupported tensor data type {dtype}")
    return name, array.reshape(dims)


def _parse_value_info(data: bytes) -> tuple[str, tuple]:
    fields = _parse_message(data)
    name = _string(fields[1]) if 1 in fields else ""
    shape: list = []
    if 2 in fields:  # TypeProto
        type_fields = _parse_message(fields[2][0][1])
        if 1 in type_fields:  # tensor_type
            tensor_fields = _parse_message(type_fields[1][0][1])
            if 2 in tensor_fields:  # shape
                shape_fields = _parse_message(tensor_fields[2][0][1])
                for _, dim_raw in shape_fields.get(1, []):
                    dim_fields = _parse_message(dim_raw)
                    if 1 in dim_fields:
                        shape.append(_ints_from_field(dim_fields[1])[0])
                    elif 2 in dim_fields:
                        shape.append(dim_fields[2][0][1].decode("utf-8"))
                    else:
                        shape.append(None)
    return name, tuple(shape)


# ---------------------------------------------------------------------------
# writer

def _serialize_tensor(name: str, array: np.ndarray) -> bytes:
    out = bytearray()
    for dim in array.shape:
        _write_varint_field(out, 1, dim)
    if array.dtype == np.int64:
        _write_varint_field(out, 2, DT_INT64)
        raw = array.astype("<i8").tobytes()
    else:
        _write_varint_field(out, 2, DT_FLOAT)
        raw = array.astype("<f4").tobytes()
    _write_bytes_field(out, 8, name.encode("utf-8"))
    _write_bytes_field(out, 9, raw)
    return bytes(out)


def _serialize_attribute(name: str, value) -> bytes:
    out = bytearray()
    _write_bytes_field(out, 1, name.encode("utf-8"))
    if isinstance(value, float):
        _write_tag(out, 2, 5)
        out.extend(struct.pack("<f", value))
        _write_varint_field(out, 20, ATTR_FLOAT)
    elif isinstance(value, int):
        _write_varint_field(out, 3, value)
        _write_varint_field(out, 20, ATTR_INT)
    elif isinstance(value, str):
        _write_bytes_field(out, 4, value.encode("utf-8"))
        _write_varint_field(out, 20, ATTR_STRING)
    elif isinstance(value, (list, tuple)) and value and isinstance(value[0], float):
        for v in value:
            _write_tag(out, 7, 5)
            out.extend(struct.pack("<f", v))
        _write_varint_field(out, 20, ATTR_FLOATS)
    elif isinstance(value, (list, tuple)):
        for v in value:
            _write_varint_field(out, 8, int(v))
        _write_varint_field(out, 20, ATTR_INTS)
    else:
        raise TypeError(f"unsupported attribute value {value!r}")
    return bytes(out)


def _serialize_node(node: NodeDef) -> bytes:
    out = bytearray()
    for inp in node.inputs:
        _write_bytes_field(out, 1, inp.encode("utf-8"))
    for outp in node.outputs:
        _write_bytes_field(out, 2, outp.encode("utf-8"))
    if node.name:
        _write_bytes_field(out, 3, node.name.encode("utf-8"))
    _write_bytes_field(out, 4, node.op_type.encode("utf-8"))
    for aname, avalue in node.attrs.items():
        _write_bytes_field(out, 5, _serialize_attribute(aname, avalue))
    return bytes(out)


def _serialize_value_info(name: str, shape: tuple, elem_type: int = DT_FLOAT) -> bytes:
    shape_out = bytearray()
    for dim in shape:
        dim_out = bytearray()
        _write_varint_field(dim_out, 1, int(dim))
        _write_bytes_field(shape_out, 1, bytes(dim_out))
    tensor_out = bytearray()
    _write_varint_field(tensor_out, 1, elem_type)
    _write_bytes_field(tensor_out, 2, bytes(shape_out))
    type_out = bytearray()
    _write_bytes_field(type_out, 1, bytes(tensor_out))
    out = bytearray()
    _write_bytes_field(out, 1, name.encode("utf-8"))
    _write_bytes_field(out, 2, bytes(type_out))
    return bytes(out)


class GraphBuilder:
    """Assemble a small ONNX classifier graph and serialize it to bytes."""

    def __init__(self, name: str = "signstream-graph"):
        self.name = name
        self.nodes: list[NodeDef] = []
        self.initializers: dict[str, np.ndarray] = {}

    def add_initializer(self, name: str, array: np.ndarray) -> str:
        self.initializers[name] = np.asarray(array)
        return name

    def add_node(self, op_type: str, inputs, outputs, **attrs) -> str:
        self.nodes.append(NodeDef(
            op_type=op_type,
            inputs=tuple(inputs),
            outputs=tuple(outputs),
            attrs=attrs,
            name=f"{op_type.lower()}_{len(self.nodes)}",
        ))
        return outputs[0]

    def serialize(self, input_name: str, input_shape: tuple,
                  output_name: str, output_shape: tuple,
                  opset: int = 13) -> bytes:
        graph = bytearray()
        for node in self.nodes:
            _write_bytes_field(graph, 1, _serialize_node(node))
        _write_bytes_field(graph, 2, self.name.encode("utf-8"))
        for tname, array in self.initializers.items():
            _write_bytes_field(graph, 5, _serialize_tensor(tname, array))
        _write_bytes_field(graph, 11, _serialize_value_info(input_name, input_shape))
        _write_bytes_field(graph, 12, _serialize_value_info(output_name, output_shape))

        model = bytearray()
        _write_varint_field(model, 1, 8)  # ir_version
        _write_bytes_field(model, 2, b"signstream")
        opset_out = bytearray()
        _write_bytes_field(opset_out, 1, b"")
        _write_varint_field(opset_out, 2, opset)
        _write_bytes_field(model, 8, bytes(opset_out))
        _write_bytes_field(model, 7, bytes(graph))
        return bytes(model)
