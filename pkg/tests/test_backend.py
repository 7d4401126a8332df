import numpy as np
import pytest

from support import (
    build_image_tower,
    build_text_tower,
    constant_frame,
    write_tiny_merges,
)
from zsar.backend import EncoderSpec, FileBackend, OnnxBackend, frame_key, load_backend
from zsar.errors import BackendError, ShapeError
from zsar.onnx_proto import save_model
from zsar.tokenizer import BpeTokenizer
from zsar.vectable import write_table

DIM = 8


def file_spec(tmp_path, table):
    path = tmp_path / "table.bin"
    write_table(path, table, DIM)
    return EncoderSpec(backend="file", embed_dim=DIM, embedding_table_path=str(path))


@pytest.fixture
def onnx_spec(tmp_path):
    merges = write_tiny_merges(tmp_path / "merges.txt")
    tok = BpeTokenizer(merges, context_length=16)
    save_model(build_text_tower(tok.vocab_size, 16, DIM), tmp_path / "text.onnx")
    save_model(build_image_tower(DIM), tmp_path / "image.onnx")
    return EncoderSpec(
        backend="onnx",
        embed_dim=DIM,
        text_model_path=str(tmp_path / "text.onnx"),
        image_model_path=str(tmp_path / "image.onnx"),
        tokenizer_path=str(merges),
        context_length=16,
    )


def test_file_backend_exact_lookup(tmp_path):
    vec = np.arange(DIM, dtype=np.float32)
    backend = FileBackend(file_spec(tmp_path, {b"snowboarding": vec}))
    out = backend.encode_texts(["snowboarding"])
    np.testing.assert_array_equal(out, vec[None, :])


def test_file_backend_repeated_text_identical_rows(tmp_path):
    vec = np.arange(DIM, dtype=np.float32)
    backend = FileBackend(file_spec(tmp_path, {b"t": vec}))
    out = backend.encode_texts(["t", "t"])
    np.testing.assert_array_equal(out[0], out[1])


def test_file_backend_missing_key(tmp_path):
    backend = FileBackend(file_spec(tmp_path, {b"known": np.ones(DIM, np.float32)}))
    with pytest.raises(BackendError, match="unknown"):
        backend.encode_texts(["unknown"])


def test_file_backend_dim_mismatch(tmp_path):
    path = tmp_path / "table.bin"
    write_table(path, {b"k": np.ones(4, np.float32)}, 4)
    spec = EncoderSpec(backend="file", embed_dim=DIM, embedding_table_path=str(path))
    with pytest.raises(BackendError, match="dimension"):
        FileBackend(spec)


def test_file_backend_frames_by_content_hash(tmp_path):
    frame = constant_frame(40)
    vec = np.linspace(0, 1, DIM).astype(np.float32)
    backend = FileBackend(file_spec(tmp_path, {frame_key(frame): vec}))
    out = backend.encode_frames(np.stack([frame]))
    np.testing.assert_array_equal(out, vec[None, :])


def test_frame_shape_contract(tmp_path):
    backend = FileBackend(file_spec(tmp_path, {b"k": np.ones(DIM, np.float32)}))
    with pytest.raises(ShapeError):
        backend.encode_frames(np.zeros((1, 64, 64, 3), np.float32))
    with pytest.raises(ShapeError):
        backend.encode_frames(np.zeros((224, 224, 3), np.float32))


def test_onnx_backend_text_determinism(onnx_spec):
    backend = OnnxBackend(onnx_spec)
    a = backend.encode_texts(["the and", "a"])
    b = backend.encode_texts(["the and", "a"])
    assert a.shape == (2, DIM)
    assert a.dtype == np.float32
    np.testing.assert_array_equal(a, b)


def test_onnx_backend_identical_texts_identical_rows(onnx_spec):
    backend = OnnxBackend(onnx_spec)
    out = backend.encode_texts(["the", "the"])
    np.testing.assert_array_equal(out[0], out[1])


def test_onnx_backend_frames(onnx_spec):
    backend = OnnxBackend(onnx_spec)
    frames = np.stack([constant_frame(10), constant_frame(10), constant_frame(200)])
    out = backend.encode_frames(frames)
    assert out.shape == (3, DIM)
    np.testing.assert_array_equal(out[0], out[1])
    assert not np.array_equal(out[0], out[2])


def test_onnx_backend_missing_model_file(tmp_path):
    spec = EncoderSpec(
        backend="onnx",
        embed_dim=DIM,
        text_model_path=str(tmp_path / "nope.onnx"),
        image_model_path=str(tmp_path / "nope2.onnx"),
        tokenizer_path=str(write_tiny_merges(tmp_path / "merges.txt")),
    )
    with pytest.raises(BackendError, match="does not exist"):
        OnnxBackend(spec)


def test_onnx_backend_self_check_catches_wrong_dim(tmp_path, onnx_spec):
    bad = EncoderSpec(**{**vars(onnx_spec), "embed_dim": DIM + 1})
    with pytest.raises(BackendError, match="expected"):
        OnnxBackend(bad)


def test_backends_interchangeable_for_classifier(tmp_path, onnx_spec):
    """File backend preloaded with onnx outputs gives bitwise-equal scores."""
    from zsar.classifier import ClassEmbedding, predict, video_embedding
    from zsar.backend import frame_key as fk
    from zsar.labels import ActionClass

    onnx_backend = OnnxBackend(onnx_spec)
    class_texts = {"yo yo": ["the"], "surfing": ["a the", "and"]}
    frames = np.stack([constant_frame(15), constant_frame(90)])

    table: dict[bytes, np.ndarray] = {}
    for texts in class_texts.values():
        for text, row in zip(texts, onnx_backend.encode_texts(texts)):
            table[text.encode("utf-8")] = row
    for frame, row in zip(frames, onnx_backend.encode_frames(frames)):
        table[fk(frame)] = row
    file_backend = FileBackend(file_spec(tmp_path, table))

    def run(backend):
        classes = [
            ClassEmbedding.from_texts(ActionClass.from_raw(name), backend.encode_texts(texts), i)
            for i, (name, texts) in enumerate(sorted(class_texts.items()))
        ]
        vbar = video_embedding(backend.encode_frames(frames))
        return predict(vbar, classes)

    a, b = run(onnx_backend), run(file_backend)
    assert a.predicted == b.predicted
    assert [(c.display, s) for c, s in a.ranking] == [
        (c.display, s) for c, s in b.ranking
    ]


def test_load_backend_dispatch(tmp_path, onnx_spec):
    table_spec = file_spec(tmp_path, {b"k": np.ones(DIM, np.float32)})
    assert isinstance(load_backend(table_spec), FileBackend)
    assert isinstance(load_backend(onnx_spec), OnnxBackend)


def test_spec_validation():
    with pytest.raises(ValueError):
        EncoderSpec(backend="tensorflow")
    with pytest.raises(ValueError):
        EncoderSpec(embed_dim=0)
