"""Numpy execution of ONNX encoder graphs.

Supports the documented operator subset used by the exported encoder
towers (opset 13 semantics): elementwise arithmetic, MatMul, activation
primitives, Softmax, ReduceMean, shape manipulation, Gather, ArgMax,
Equal, Cast, Concat, and Slice. Anything else raises BackendError naming
the operator, so an unsupported file fails loudly instead of silently
producing garbage. Execution is single-threaded numpy and therefore
deterministic.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import BackendError
from .onnx_proto import _ONNX_TO_NP, Model


def _op_add(a, b):
    return a + b


def _op_sub(a, b):
    return a - b


def _op_mul(a, b):
    return a * b


def _op_div(a, b):
    return a / b


def _op_matmul(a, b):
    return np.matmul(a, b)


def _op_sqrt(a):
    return np.sqrt(a)


def _op_erf(a):
    return erf(a).astype(a.dtype, copy=False)


def _op_sigmoid(a):
    out = np.empty_like(a)
    np.exp(-np.abs(a), out=out)
    positive = a >= 0
    out[positive] = 1.0 / (1.0 + out[positive])
    out[~positive] = out[~positive] / (1.0 + out[~positive])
    return out


def _op_exp(a):
    return np.exp(a)


def _op_neg(a):
    return -a


def _op_pow(a, b):
    return np.power(a, b)


def _op_relu(a):
    return np.maximum(a, 0)


def _op_tanh(a):
    return np.tanh(a)


_SIMPLE_OPS = {
    "Add": _op_add,
    "Sub": _op_sub,
    "Mul": _op_mul,
    "Div": _op_div,
    "MatMul": _op_matmul,
    "Sqrt": _op_sqrt,
    "Erf": _op_erf,
    "Sigmoid": _op_sigmoid,
    "Exp": _op_exp,
    "Neg": _op_neg,
    "Pow": _op_pow,
    "Relu": _op_relu,
    "Tanh": _op_tanh,
}


class GraphExecutor:
    """Executes a decoded ONNX model on numpy arrays."""

    def __init__(self, model: Model):
        self.graph = model.graph
        self.input_names = [
            info.name for info in self.graph.inputs
            if info.name not in self.graph.initializers
        ]
        self.output_names = [info.name for info in self.graph.outputs]
        for node in self.graph.nodes:
            if node.op_type not in _SIMPLE_OPS and not hasattr(
                self, f"_run_{node.op_type.lower()}"
            ):
                raise BackendError(f"unsupported operator {node.op_type!r}")

    def run(self, feeds: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        values: dict[str, np.ndarray] = dict(self.graph.initializers)
        for name in self.input_names:
            if name not in feeds:
                raise BackendError(f"missing graph input {name!r}")
        values.update(feeds)
        for node in self.graph.nodes:
            try:
                args = [values[n] for n in node.inputs]
            except KeyError as exc:
                raise BackendError(
                    f"node {node.op_type} consumes undefined value {exc}"
                ) from exc
            try:
                if node.op_type in _SIMPLE_OPS:
                    results = (_SIMPLE_OPS[node.op_type](*args),)
                else:
                    runner = getattr(self, f"_run_{node.op_type.lower()}")
                    results = runner(node.attrs, *args)
            except BackendError:
                raise
            except Exception as exc:
                raise BackendError(f"node {node.op_type} failed: {exc}") from exc
            for name, value in zip(node.outputs, results):
                values[name] = value
        missing = [n for n in self.output_names if n not in values]
        if missing:
            raise BackendError(f"graph did not produce outputs {missing}")
        return {n: values[n] for n in self.output_names}

    # -- ops with attributes or non-trivial semantics ----------------------

    def _run_softmax(self, attrs, x):
        axis = attrs.get("axis", -1)
        shifted = x - np.max(x, axis=axis, keepdims=True)
        e = np.exp(shifted)
        return (e / np.sum(e, axis=axis, keepdims=True),)

    def _run_reducemean(self, attrs, x):
        axes = attrs.get("axes")
        keepdims = bool(attrs.get("keepdims", 1))
        axis = tuple(axes) if axes is not None else None
        return (np.mean(x, axis=axis, keepdims=keepdims, dtype=x.dtype),)

    def _run_reducesum(self, attrs, x):
        axes = attrs.get("axes")
        keepdims = bool(attrs.get("keepdims", 1))
        axis = tuple(axes) if axes is not None else None
        return (np.sum(x, axis=axis, keepdims=keepdims, dtype=x.dtype),)

    def _run_transpose(self, attrs, x):
        perm = attrs.get("perm")
        return (np.transpose(x, perm),)

    def _run_reshape(self, attrs, x, shape):
        target = [int(v) for v in np.asarray(shape).ravel()]
        resolved = []
        for i, d in enumerate(target):
            if d == 0:
                resolved.append(x.shape[i])
            else:
                resolved.append(d)
        return (x.reshape(resolved),)

    def _run_gather(self, attrs, x, indices):
        axis = attrs.get("axis", 0)
        return (np.take(x, np.asarray(indices, dtype=np.int64), axis=axis),)

    def _run_argmax(self, attrs, x):
        axis = attrs.get("axis", 0)
        keepdims = bool(attrs.get("keepdims", 1))
        out = np.argmax(x, axis=axis)
        if keepdims:
            out = np.expand_dims(out, axis)
        return (out.astype(np.int64),)

    def _run_equal(self, attrs, a, b):
        return (np.equal(a, b),)

    def _run_cast(self, attrs, x):
        to = attrs.get("to")
        if to not in _ONNX_TO_NP:
            raise BackendError(f"Cast: unsupported target type {to}")
        return (x.astype(_ONNX_TO_NP[to]),)

    def _run_concat(self, attrs, *args):
        axis = attrs.get("axis", 0)
        return (np.concatenate(args, axis=axis),)

    def _run_slice(self, attrs, x, starts, ends, axes=None, steps=None):
        starts = np.asarray(starts).ravel()
        ends = np.asarray(ends).ravel()
        axes = (
            np.asarray(axes).ravel()
            if axes is not None
            else np.arange(len(starts), dtype=np.int64)
        )
        steps = (
            np.asarray(steps).ravel()
            if steps is not None
            else np.ones(len(starts), dtype=np.int64)
        )
        slices = [slice(None)] * x.ndim
        for start, end, axis, step in zip(starts, ends, axes, steps):
            slices[int(axis)] = slice(int(start), int(end), int(step))
        return (x[tuple(slices)],)

    def _run_gemm(self, attrs, a, b, c=None):
        alpha = attrs.get("alpha", 1.0)
        beta = attrs.get("beta", 1.0)
        if attrs.get("transA", 0):
            a = a.T
        if attrs.get("transB", 0):
            b = b.T
        out = alpha * (a @ b)
        if c is not None:
            out = out + beta * c
        return (out.astype(a.dtype, copy=False),)

    def _run_identity(self, attrs, x):
        return (x,)
