"""Write-only ONNX protobuf serialization.

Emits standard ONNX model files (IR version 7, opset 13) directly on the
protobuf wire format. Only what the exported graphs need is supported:
nodes with int/float/string/ints attributes, float32/int64/bool raw-data
initializers, and tensor-typed graph inputs/outputs with one symbolic
batch dimension.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

FLOAT, INT64, BOOL = 1, 7, 9

_DTYPES = {
    np.dtype(np.float32): FLOAT,
    np.dtype(np.int64): INT64,
    np.dtype(np.bool_): BOOL,
}


def _varint(value: int) -> bytes:
    if value < 0:
        value &= (1 << 64) - 1
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _key(field: int, wire: int) -> bytes:
    return _varint((field << 3) | wire)


def _ld(field: int, payload: bytes) -> bytes:
    return _key(field, 2) + _varint(len(payload)) + payload


def _s(field: int, text: str) -> bytes:
    return _ld(field, text.encode("utf-8")) if text else b""


def _i(field: int, value: int) -> bytes:
    return _key(field, 0) + _varint(value)


def tensor(name: str, array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array)
    out = bytearray()
    for d in array.shape:
        out += _i(1, d)
    out += _i(2, _DTYPES[array.dtype])
    out += _s(8, name)
    out += _ld(9, array.astype(array.dtype.newbyteorder("<"), copy=False).tobytes())
    return bytes(out)


def attribute(name: str, value) -> bytes:
    out = bytearray(_s(1, name))
    if isinstance(value, bool):
        raise TypeError("bool attributes are not a thing in this subset")
    if isinstance(value, int):
        out += _i(3, value) + _i(20, 2)  # INT
    elif isinstance(value, float):
        out += _key(2, 5) + np.float32(value).tobytes()
        out += _i(20, 1)  # FLOAT
    elif isinstance(value, str):
        out += _ld(4, value.encode("utf-8")) + _i(20, 3)  # STRING
    elif isinstance(value, (list, tuple)) and all(isinstance(v, int) for v in value):
        for v in value:
            out += _i(8, v)
        out += _i(20, 7)  # INTS
    else:
        raise TypeError(f"unsupported attribute {name}={value!r}")
    return bytes(out)


def node(op_type: str, inputs: list[str], outputs: list[str],
         attrs: dict | None = None, name: str = "") -> bytes:
    out = bytearray()
    for n in inputs:
        out += _s(1, n)
    for n in outputs:
        out += _s(2, n)
    out += _s(3, name)
    out += _s(4, op_type)
    for attr_name in sorted(attrs or {}):
        out += _ld(5, attribute(attr_name, attrs[attr_name]))
    return bytes(out)


def value_info(name: str, elem_type: int, shape: tuple) -> bytes:
    dims = bytearray()
    for d in shape:
        entry = _s(2, d) if isinstance(d, str) else _i(1, int(d))
        dims += _ld(1, entry)
    tensor_type = _i(1, elem_type) + _ld(2, bytes(dims))
    return _s(1, name) + _ld(2, _ld(1, tensor_type))


def model(graph_name: str, nodes: list[bytes], initializers: list[bytes],
          inputs: list[bytes], outputs: list[bytes],
          opset: int = 13, ir_version: int = 7,
          producer: str = "encoder-export") -> bytes:
    graph = bytearray()
    for n in nodes:
        graph += _ld(1, n)
    graph += _s(2, graph_name)
    for t in initializers:
        graph += _ld(5, t)
    for vi in inputs:
        graph += _ld(11, vi)
    for vi in outputs:
        graph += _ld(12, vi)
    out = bytearray()
    out += _i(1, ir_version)
    out += _s(2, producer)
    out += _ld(7, bytes(graph))
    out += _ld(8, _i(2, opset))
    return bytes(out)


def write(path: str | Path, payload: bytes) -> None:
    Path(path).write_bytes(payload)
