"""Reading and writing ONNX model files without external dependencies.

This is a deliberately small protobuf wire codec covering the subset of the
ONNX IR needed to store and load encoder graphs: models, graphs, nodes,
attributes, initializer tensors, and tensor-type value infos. Unknown
fields are skipped on read, so files produced by other exporters load as
long as they only use standard tensors. Files written here are ordinary
ONNX protobufs (IR version 7, default opset 13) and load in stock ONNX
tooling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BackendError

# TensorProto.DataType values.
FLOAT = 1
UINT8 = 2
INT32 = 6
INT64 = 7
BOOL = 9
DOUBLE = 11

_NP_TO_ONNX = {
    np.dtype(np.float32): FLOAT,
    np.dtype(np.uint8): UINT8,
    np.dtype(np.int32): INT32,
    np.dtype(np.int64): INT64,
    np.dtype(np.bool_): BOOL,
    np.dtype(np.float64): DOUBLE,
}
_ONNX_TO_NP = {v: k for k, v in _NP_TO_ONNX.items()}

# AttributeProto.AttributeType values.
_AT_FLOAT, _AT_INT, _AT_STRING, _AT_TENSOR = 1, 2, 3, 4
_AT_FLOATS, _AT_INTS, _AT_STRINGS = 6, 7, 8


@dataclass
class TensorInfo:
    """Declared name/type/shape of a graph input or output.

    Shape entries are ints for fixed dimensions or strings for symbolic
    ones (e.g. "batch").
    """

    name: str
    elem_type: int = FLOAT
    shape: tuple = ()


@dataclass
class Node:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    attrs: dict = field(default_factory=dict)
    name: str = ""


@dataclass
class Graph:
    name: str = "graph"
    nodes: list[Node] = field(default_factory=list)
    initializers: dict[str, np.ndarray] = field(default_factory=dict)
    inputs: list[TensorInfo] = field(default_factory=list)
    outputs: list[TensorInfo] = field(default_factory=list)


@dataclass
class Model:
    graph: Graph
    opset_version: int = 13
    ir_version: int = 7
    producer_name: str = "zsar"


# ---------------------------------------------------------------------------
# wire primitives

def _varint(value: int) -> bytes:
    if value < 0:
        value &= (1 << 64) - 1  # int64 two's complement
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise BackendError("truncated varint")
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise BackendError("varint too long")


def _signed64(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def _tag(field_no: int, wire_type: int) -> bytes:
    return _varint((field_no << 3) | wire_type)


def _len_field(field_no: int, payload: bytes) -> bytes:
    return _tag(field_no, 2) + _varint(len(payload)) + payload


def _str_field(field_no: int, value: str) -> bytes:
    return _len_field(field_no, value.encode("utf-8")) if value else b""


def _int_field(field_no: int, value: int) -> bytes:
    return _tag(field_no, 0) + _varint(value)


def _skip(buf: bytes, pos: int, wire_type: int) -> int:
    if wire_type == 0:
        _, pos = _read_varint(buf, pos)
        return pos
    if wire_type == 1:
        return pos + 8
    if wire_type == 2:
        size, pos = _read_varint(buf, pos)
        return pos + size
    if wire_type == 5:
        return pos + 4
    raise BackendError(f"unsupported wire type {wire_type}")


def _fields(buf: bytes):
    """Iterate (field_no, wire_type, value-or-span) over a message buffer."""
    pos = 0
    while pos < len(buf):
        key, pos = _read_varint(buf, pos)
        field_no, wire_type = key >> 3, key & 7
        if wire_type == 0:
            value, pos = _read_varint(buf, pos)
            yield field_no, wire_type, value
        elif wire_type == 2:
            size, pos = _read_varint(buf, pos)
            yield field_no, wire_type, buf[pos : pos + size]
            pos += size
        elif wire_type == 5:
            yield field_no, wire_type, buf[pos : pos + 4]
            pos += 4
        elif wire_type == 1:
            yield field_no, wire_type, buf[pos : pos + 8]
            pos += 8
        else:
            pos = _skip(buf, pos, wire_type)


# ---------------------------------------------------------------------------
# tensors

def _encode_tensor(name: str, array: np.ndarray) -> bytes:
    dtype = np.dtype(array.dtype)
    if dtype not in _NP_TO_ONNX:
        raise BackendError(f"unsupported tensor dtype {dtype}")
    out = bytearray()
    for d in array.shape:
        out += _int_field(1, d)  # dims
    out += _int_field(2, _NP_TO_ONNX[dtype])  # data_type
    out += _str_field(8, name)
    raw = np.ascontiguousarray(array, dtype=dtype.newbyteorder("<")).tobytes()
    out += _len_field(9, raw)  # raw_data
    return bytes(out)


def _decode_tensor(buf: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    data_type = FLOAT
    name = ""
    raw = None
    float_data: list[float] = []
    int_data: list[int] = []
    double_data: list[float] = []
    for field_no, wire_type, value in _fields(buf):
        if field_no == 1 and wire_type == 0:
            dims.append(_signed64(value))
        elif field_no == 1 and wire_type == 2:  # packed dims
            pos = 0
            while pos < len(value):
                v, pos = _read_varint(value, pos)
                dims.append(_signed64(v))
        elif field_no == 2:
            data_type = value
        elif field_no == 8:
            name = value.decode("utf-8")
        elif field_no == 9:
            raw = bytes(value)
        elif field_no == 4:  # float_data, packed fixed32
            float_data.extend(np.frombuffer(value, dtype="<f4").tolist())
        elif field_no in (5, 7):  # int32_data / int64_data, packed varints
            pos = 0
            while pos < len(value):
                v, pos = _read_varint(value, pos)
                int_data.append(_signed64(v))
        elif field_no == 10:  # double_data, packed fixed64
            double_data.extend(np.frombuffer(value, dtype="<f8").tolist())
    if data_type not in _ONNX_TO_NP:
        raise BackendError(f"tensor {name!r}: unsupported data type {data_type}")
    dtype = _ONNX_TO_NP[data_type]
    if raw is not None:
        array = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).astype(dtype)
    elif float_data:
        array = np.asarray(float_data, dtype=dtype)
    elif double_data:
        array = np.asarray(double_data, dtype=dtype)
    elif int_data:
        array = np.asarray(int_data, dtype=dtype)
    else:
        array = np.zeros(0, dtype=dtype)
    return name, array.reshape(dims)


# ---------------------------------------------------------------------------
# attributes

def _encode_attribute(name: str, value) -> bytes:
    out = bytearray()
    out += _str_field(1, name)
    if isinstance(value, bool):
        raise BackendError(f"attribute {name!r}: use int, not bool")
    if isinstance(value, float):
        out += _tag(2, 5) + np.float32(value).tobytes()
        out += _int_field(20, _AT_FLOAT)
    elif isinstance(value, int):
        out += _int_field(3, value)
        out += _int_field(20, _AT_INT)
    elif isinstance(value, str):
        out += _len_field(4, value.encode("utf-8"))
        out += _int_field(20, _AT_STRING)
    elif isinstance(value, np.ndarray):
        out += _len_field(5, _encode_tensor("", value))
        out += _int_field(20, _AT_TENSOR)
    elif isinstance(value, (list, tuple)):
        if all(isinstance(v, int) for v in value):
            for v in value:
                out += _int_field(8, v)
            out += _int_field(20, _AT_INTS)
        elif all(isinstance(v, float) for v in value):
            for v in value:
                out += _tag(7, 5) + np.float32(v).tobytes()
            out += _int_field(20, _AT_FLOATS)
        elif all(isinstance(v, str) for v in value):
            for v in value:
                out += _len_field(9, v.encode("utf-8"))
            out += _int_field(20, _AT_STRINGS)
        else:
            raise BackendError(f"attribute {name!r}: mixed list type")
    else:
        raise BackendError(f"attribute {name!r}: unsupported type {type(value)}")
    return bytes(out)


def _decode_attribute(buf: bytes) -> tuple[str, object]:
    name = ""
    atype = 0
    f = i = s = t = None
    floats: list[float] = []
    ints: list[int] = []
    strings: list[str] = []
    for field_no, wire_type, value in _fields(buf):
        if field_no == 1:
            name = value.decode("utf-8")
        elif field_no == 2:
            f = float(np.frombuffer(value, dtype="<f4")[0])
        elif field_no == 3:
            i = _signed64(value)
        elif field_no == 4:
            s = value.decode("utf-8")
        elif field_no == 5:
            t = _decode_tensor(value)[1]
        elif field_no == 7:
            if wire_type == 5:
                floats.append(float(np.frombuffer(value, dtype="<f4")[0]))
            else:
                floats.extend(np.frombuffer(value, dtype="<f4").tolist())
        elif field_no == 8:
            if wire_type == 0:
                ints.append(_signed64(value))
            else:
                pos = 0
                while pos < len(value):
                    v, pos = _read_varint(value, pos)
                    ints.append(_signed64(v))
        elif field_no == 9:
            strings.append(value.decode("utf-8"))
        elif field_no == 20:
            atype = value
    if atype == _AT_FLOAT:
        return name, f
    if atype == _AT_INT:
        return name, i
    if atype == _AT_STRING:
        return name, s
    if atype == _AT_TENSOR:
        return name, t
    if atype == _AT_FLOATS:
        return name, floats
    if atype == _AT_INTS:
        return name, ints
    if atype == _AT_STRINGS:
        return name, strings
    # Untyped writers: fall back to whichever payload is present.
    for candidate in (i, f, s, t):
        if candidate is not None:
            return name, candidate
    if ints:
        return name, ints
    if floats:
        return name, floats
    if strings:
        return name, strings
    raise BackendError(f"attribute {name!r}: no value")


# ---------------------------------------------------------------------------
# value info

def _encode_value_info(info: TensorInfo) -> bytes:
    shape = bytearray()
    for d in info.shape:
        if isinstance(d, str):
            dim = _str_field(2, d)
        else:
            dim = _int_field(1, int(d))
        shape += _len_field(1, dim)
    tensor_type = _int_field(1, info.elem_type) + _len_field(2, bytes(shape))
    type_proto = _len_field(1, tensor_type)
    return _str_field(1, info.name) + _len_field(2, type_proto)


def _decode_value_info(buf: bytes) -> TensorInfo:
    name = ""
    elem_type = FLOAT
    shape: list = []
    for field_no, _, value in _fields(buf):
        if field_no == 1:
            name = value.decode("utf-8")
        elif field_no == 2:
            for f2, _, tensor_type in _fields(value):
                if f2 != 1:
                    continue
                for f3, _, v3 in _fields(tensor_type):
                    if f3 == 1:
                        elem_type = v3
                    elif f3 == 2:
                        for f4, _, dim_buf in _fields(v3):
                            if f4 != 1:
                                continue
                            entry = None
                            for f5, _, v5 in _fields(dim_buf):
                                if f5 == 1:
                                    entry = _signed64(v5)
                                elif f5 == 2:
                                    entry = v5.decode("utf-8")
                            shape.append(entry)
    return TensorInfo(name=name, elem_type=elem_type, shape=tuple(shape))


# ---------------------------------------------------------------------------
# nodes, graphs, models

def _encode_node(node: Node) -> bytes:
    out = bytearray()
    for name in node.inputs:
        out += _str_field(1, name)
    for name in node.outputs:
        out += _str_field(2, name)
    out += _str_field(3, node.name)
    out += _str_field(4, node.op_type)
    for attr_name in sorted(node.attrs):
        out += _len_field(5, _encode_attribute(attr_name, node.attrs[attr_name]))
    return bytes(out)


def _decode_node(buf: bytes) -> Node:
    node = Node(op_type="", inputs=[], outputs=[])
    for field_no, _, value in _fields(buf):
        if field_no == 1:
            node.inputs.append(value.decode("utf-8"))
        elif field_no == 2:
            node.outputs.append(value.decode("utf-8"))
        elif field_no == 3:
            node.name = value.decode("utf-8")
        elif field_no == 4:
            node.op_type = value.decode("utf-8")
        elif field_no == 5:
            attr_name, attr_value = _decode_attribute(value)
            node.attrs[attr_name] = attr_value
    return node


def _encode_graph(graph: Graph) -> bytes:
    out = bytearray()
    for node in graph.nodes:
        out += _len_field(1, _encode_node(node))
    out += _str_field(2, graph.name)
    for name, array in graph.initializers.items():
        out += _len_field(5, _encode_tensor(name, array))
    for info in graph.inputs:
        out += _len_field(11, _encode_value_info(info))
    for info in graph.outputs:
        out += _len_field(12, _encode_value_info(info))
    return bytes(out)


def _decode_graph(buf: bytes) -> Graph:
    graph = Graph()
    for field_no, _, value in _fields(buf):
        if field_no == 1:
            graph.nodes.append(_decode_node(value))
        elif field_no == 2:
            graph.name = value.decode("utf-8")
        elif field_no == 5:
            name, array = _decode_tensor(value)
            graph.initializers[name] = array
        elif field_no == 11:
            graph.inputs.append(_decode_value_info(value))
        elif field_no == 12:
            graph.outputs.append(_decode_value_info(value))
    return graph


def encode_model(model: Model) -> bytes:
    out = bytearray()
    out += _int_field(1, model.ir_version)
    out += _str_field(2, model.producer_name)
    out += _len_field(7, _encode_graph(model.graph))
    opset = _str_field(1, "") + _int_field(2, model.opset_version)
    out += _len_field(8, opset)
    return bytes(out)


def decode_model(buf: bytes) -> Model:
    graph = None
    ir_version = 7
    opset_version = 13
    producer = ""
    for field_no, _, value in _fields(buf):
        if field_no == 1:
            ir_version = value
        elif field_no == 2:
            producer = value.decode("utf-8")
        elif field_no == 7:
            graph = _decode_graph(value)
        elif field_no == 8:
            domain = ""
            version = None
            for f2, _, v2 in _fields(value):
                if f2 == 1:
                    domain = v2.decode("utf-8")
                elif f2 == 2:
                    version = v2
            if domain == "" and version is not None:
                opset_version = version
    if graph is None:
        raise BackendError("model has no graph")
    return Model(graph=graph, opset_version=opset_version,
                 ir_version=ir_version, producer_name=producer)


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_bytes(encode_model(model))


def load_model(path: str | Path) -> Model:
    path = Path(path)
    if not path.exists():
        raise BackendError(f"model file does not exist: {path}")
    return decode_model(path.read_bytes())
