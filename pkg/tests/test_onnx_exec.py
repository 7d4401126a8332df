import numpy as np
import pytest
from scipy.special import erf

from support import build_image_tower, build_text_tower
from zsar.errors import BackendError
from zsar.onnx_exec import GraphExecutor
from zsar.onnx_proto import BOOL, FLOAT, INT64, Graph, Model, Node, TensorInfo


def single_node(op_type, inputs, attrs=None, initializers=None, n_outputs=1):
    """Build a one-node model with inputs named i0, i1, ... and output o0."""
    graph = Graph(
        inputs=[TensorInfo(f"i{k}", FLOAT) for k in range(inputs)],
        outputs=[TensorInfo(f"o{k}", FLOAT) for k in range(n_outputs)],
        initializers=initializers or {},
        nodes=[
            Node(
                op_type,
                [f"i{k}" for k in range(inputs)] + sorted(initializers or {}),
                [f"o{k}" for k in range(n_outputs)],
                attrs or {},
            )
        ],
    )
    return GraphExecutor(Model(graph=graph))


RNG = np.random.default_rng(3)


def run1(op_type, arrays, attrs=None, initializers=None):
    ex = single_node(op_type, len(arrays), attrs, initializers)
    feeds = {f"i{k}": a for k, a in enumerate(arrays)}
    return ex.run(feeds)["o0"]


def test_elementwise_ops_match_numpy():
    a = RNG.standard_normal((3, 4)).astype(np.float32)
    b = RNG.standard_normal((3, 4)).astype(np.float32)
    np.testing.assert_array_equal(run1("Add", [a, b]), a + b)
    np.testing.assert_array_equal(run1("Sub", [a, b]), a - b)
    np.testing.assert_array_equal(run1("Mul", [a, b]), a * b)
    np.testing.assert_array_equal(run1("Div", [a, np.abs(b) + 1]), a / (np.abs(b) + 1))
    np.testing.assert_array_equal(run1("Sqrt", [np.abs(a)]), np.sqrt(np.abs(a)))
    np.testing.assert_array_equal(run1("Erf", [a]), erf(a).astype(np.float32))
    np.testing.assert_allclose(
        run1("Sigmoid", [a]), 1.0 / (1.0 + np.exp(-a.astype(np.float64))), rtol=1e-6
    )


def test_broadcasting():
    a = RNG.standard_normal((2, 3, 4)).astype(np.float32)
    bias = RNG.standard_normal(4).astype(np.float32)
    np.testing.assert_array_equal(run1("Add", [a, bias]), a + bias)


def test_matmul_batched():
    a = RNG.standard_normal((2, 3, 4)).astype(np.float32)
    b = RNG.standard_normal((4, 5)).astype(np.float32)
    np.testing.assert_array_equal(run1("MatMul", [a, b]), np.matmul(a, b))


def test_softmax_matches_reference():
    x = RNG.standard_normal((2, 7)).astype(np.float32)
    got = run1("Softmax", [x], {"axis": -1})
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    np.testing.assert_allclose(got, e / e.sum(axis=-1, keepdims=True), rtol=1e-6)
    np.testing.assert_allclose(got.sum(axis=-1), 1.0, rtol=1e-6)


def test_reduce_mean_axes_and_keepdims():
    x = RNG.standard_normal((2, 3, 5)).astype(np.float32)
    np.testing.assert_allclose(
        run1("ReduceMean", [x], {"axes": [1], "keepdims": 0}), x.mean(axis=1), rtol=1e-6
    )
    np.testing.assert_allclose(
        run1("ReduceMean", [x], {"axes": [1, 2], "keepdims": 1}),
        x.mean(axis=(1, 2), keepdims=True),
        rtol=1e-6,
    )


def test_transpose_and_reshape():
    x = RNG.standard_normal((2, 3, 4)).astype(np.float32)
    np.testing.assert_array_equal(
        run1("Transpose", [x], {"perm": [0, 2, 1]}), x.transpose(0, 2, 1)
    )
    shape = np.array([0, 12], dtype=np.int64)
    got = run1("Reshape", [x], initializers={"shape": shape})
    np.testing.assert_array_equal(got, x.reshape(2, 12))
    shape = np.array([-1, 4], dtype=np.int64)
    got = run1("Reshape", [x], initializers={"shape2": shape})
    np.testing.assert_array_equal(got, x.reshape(6, 4))


def test_gather_rows():
    table = RNG.standard_normal((10, 4)).astype(np.float32)
    ids = np.array([[1, 3], [0, 9]], dtype=np.int64)
    graph = Graph(
        inputs=[TensorInfo("ids", INT64, (2, 2))],
        outputs=[TensorInfo("o0", FLOAT)],
        initializers={"table": table},
        nodes=[Node("Gather", ["table", "ids"], ["o0"], {"axis": 0})],
    )
    got = GraphExecutor(Model(graph=graph)).run({"ids": ids})["o0"]
    np.testing.assert_array_equal(got, table[ids])


def test_argmax_equal_cast_pipeline():
    # The end-of-sequence pooling trick: select per-row positions by mask.
    ids = np.array([[5, 9, 2], [1, 0, 7]], dtype=np.int64)
    graph = Graph(
        inputs=[TensorInfo("ids", INT64, (2, 3))],
        outputs=[TensorInfo("mask", FLOAT)],
        initializers={"positions": np.arange(3, dtype=np.int64)},
        nodes=[
            Node("ArgMax", ["ids"], ["eos"], {"axis": 1, "keepdims": 1}),
            Node("Equal", ["positions", "eos"], ["hit"]),
            Node("Cast", ["hit"], ["mask"], {"to": FLOAT}),
        ],
    )
    mask = GraphExecutor(Model(graph=graph)).run({"ids": ids})["mask"]
    np.testing.assert_array_equal(
        mask, np.array([[0, 1, 0], [0, 0, 1]], dtype=np.float32)
    )


def test_concat_and_slice():
    a = RNG.standard_normal((2, 2, 3)).astype(np.float32)
    b = RNG.standard_normal((2, 1, 3)).astype(np.float32)
    graph = Graph(
        inputs=[TensorInfo("a", FLOAT), TensorInfo("b", FLOAT)],
        outputs=[TensorInfo("cat", FLOAT), TensorInfo("head", FLOAT)],
        initializers={
            "starts": np.array([0], dtype=np.int64),
            "ends": np.array([1], dtype=np.int64),
            "axes": np.array([1], dtype=np.int64),
        },
        nodes=[
            Node("Concat", ["b", "a"], ["cat"], {"axis": 1}),
            Node("Slice", ["cat", "starts", "ends", "axes"], ["head"]),
        ],
    )
    out = GraphExecutor(Model(graph=graph)).run({"a": a, "b": b})
    np.testing.assert_array_equal(out["cat"], np.concatenate([b, a], axis=1))
    np.testing.assert_array_equal(out["head"], np.concatenate([b, a], axis=1)[:, 0:1])


def test_unsupported_op_rejected_at_load():
    graph = Graph(
        inputs=[TensorInfo("x", FLOAT)],
        outputs=[TensorInfo("y", FLOAT)],
        nodes=[Node("ConvTranspose", ["x"], ["y"])],
    )
    with pytest.raises(BackendError, match="ConvTranspose"):
        GraphExecutor(Model(graph=graph))


def test_missing_feed_rejected():
    ex = single_node("Sqrt", 1)
    with pytest.raises(BackendError, match="missing graph input"):
        ex.run({})


def test_text_tower_matches_independent_numpy():
    model = build_text_tower(vocab_size=300, ctx=8, dim=6, seed=5)
    ex = GraphExecutor(model)
    tokens = RNG.integers(0, 300, size=(4, 8)).astype(np.int64)
    got = ex.run({"tokens": tokens})["text_embedding"]
    emb = model.graph.initializers["token_embedding"]
    proj = model.graph.initializers["projection"]
    want = emb[tokens].mean(axis=1) @ proj
    np.testing.assert_allclose(got, want, rtol=1e-6)
    assert got.shape == (4, 6)


def test_image_tower_matches_independent_numpy():
    model = build_image_tower(dim=6, seed=9)
    ex = GraphExecutor(model)
    images = RNG.standard_normal((2, 3, 224, 224)).astype(np.float32)
    got = ex.run({"image": images})["image_embedding"]
    proj = model.graph.initializers["projection"]
    bias = model.graph.initializers["bias"]
    want = images.mean(axis=(2, 3)) @ proj + bias
    np.testing.assert_allclose(got, want, rtol=1e-5)


def test_executor_is_deterministic():
    model = build_text_tower(vocab_size=300, ctx=8, dim=6)
    ex = GraphExecutor(model)
    tokens = RNG.integers(0, 300, size=(2, 8)).astype(np.int64)
    a = ex.run({"tokens": tokens})["text_embedding"]
    b = ex.run({"tokens": tokens})["text_embedding"]
    np.testing.assert_array_equal(a, b)
