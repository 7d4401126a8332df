"""Frozen text/image encoder pair behind a uniform interface.

Two interchangeable backends: "onnx" runs exported encoder towers, "file"
looks embeddings up in a precomputed table (the deterministic offline
path). Both return raw encoder outputs; normalization happens exactly
once, inside the classifier's cosine step.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BackendError, ShapeError
from .preprocess import IMAGE_SIZE
from .vectable import read_table

FRAME_KEY_PREFIX = b"sha256:"


@dataclass
class EncoderSpec:
    """Which backend to load and where its files live."""

    backend: str = "file"  # "onnx" | "file"
    model_tag: str = "custom"  # "ViT-B/32" | "ViT-B/16" | "custom"
    embed_dim: int = 512
    text_model_path: str = ""
    image_model_path: str = ""
    embedding_table_path: str = ""
    tokenizer_path: str = ""
    context_length: int = 77

    def __post_init__(self):
        if self.backend not in ("onnx", "file"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be positive")

    def required_paths(self) -> list[str]:
        if self.backend == "file":
            return [self.embedding_table_path]
        return [self.text_model_path, self.image_model_path, self.tokenizer_path]


def frame_key(frame: np.ndarray) -> bytes:
    """Content-hash lookup key for one preprocessed frame."""
    data = np.ascontiguousarray(frame, dtype="<f4").tobytes()
    return FRAME_KEY_PREFIX + hashlib.sha256(data).hexdigest().encode("ascii")


def _check_frames(frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames)
    if frames.ndim != 4 or frames.shape[1:] != (IMAGE_SIZE, IMAGE_SIZE, 3):
        raise ShapeError(
            f"frames must be (n, {IMAGE_SIZE}, {IMAGE_SIZE}, 3), got {frames.shape}"
        )
    return frames.astype(np.float32, copy=False)


class FileBackend:
    """Embedding lookup from a precomputed binary table.

    Text keys are the UTF-8 bytes of the exact prompt text; frame keys are
    content hashes of the preprocessed frame (see frame_key).
    """

    def __init__(self, spec: EncoderSpec):
        self.spec = spec
        if not spec.embedding_table_path:
            raise BackendError("file backend requires embedding_table_path")
        dim, self._table = read_table(spec.embedding_table_path)
        if dim != spec.embed_dim:
            raise BackendError(
                f"table dimension {dim} does not match embed_dim {spec.embed_dim}"
            )

    def _lookup(self, key: bytes, what: str) -> np.ndarray:
        vec = self._table.get(key)
        if vec is None:
            raise BackendError(f"no embedding for {what}: {key!r}")
        return vec

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise BackendError("encode_texts requires at least one text")
        rows = [self._lookup(t.encode("utf-8"), "text") for t in texts]
        return np.stack(rows)

    def encode_frames(self, frames: np.ndarray) -> np.ndarray:
        frames = _check_frames(frames)
        rows = [self._lookup(frame_key(f), "frame") for f in frames]
        return np.stack(rows)


class OnnxBackend:
    """Runs exported text/image towers.

    Tower contract: the text graph takes int64 token ids (batch, context)
    and produces (batch, dim) float32; the image graph takes float32
    (batch, 3, 224, 224) NCHW and produces (batch, dim) float32.
    """

    def __init__(self, spec: EncoderSpec):
        from .onnx_exec import GraphExecutor
        from .onnx_proto import load_model
        from .tokenizer import BpeTokenizer

        self.spec = spec
        for path in (spec.text_model_path, spec.image_model_path):
            if not path or not Path(path).exists():
                raise BackendError(f"model file does not exist: {path!r}")
        if not spec.tokenizer_path or not Path(spec.tokenizer_path).exists():
            raise BackendError(f"tokenizer file does not exist: {spec.tokenizer_path!r}")
        self.tokenizer = BpeTokenizer(spec.tokenizer_path, spec.context_length)
        self._text = GraphExecutor(load_model(spec.text_model_path))
        self._image = GraphExecutor(load_model(spec.image_model_path))
        if len(self._text.input_names) != 1 or len(self._text.output_names) != 1:
            raise BackendError("text tower must have exactly one input and one output")
        if len(self._image.input_names) != 1 or len(self._image.output_names) != 1:
            raise BackendError("image tower must have exactly one input and one output")
        self._self_check()

    def _self_check(self):
        out = self.encode_texts(["a"])
        if out.shape != (1, self.spec.embed_dim):
            raise BackendError(
                f"text tower produced shape {out.shape}, expected (1, {self.spec.embed_dim})"
            )
        probe = np.zeros((1, IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.float32)
        out = self.encode_frames(probe)
        if out.shape != (1, self.spec.embed_dim):
            raise BackendError(
                f"image tower produced shape {out.shape}, expected (1, {self.spec.embed_dim})"
            )

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise BackendError("encode_texts requires at least one text")
        tokens = self.tokenizer.tokenize(texts)
        feeds = {self._text.input_names[0]: tokens}
        out = self._text.run(feeds)[self._text.output_names[0]]
        return np.asarray(out, dtype=np.float32)

    def encode_frames(self, frames: np.ndarray) -> np.ndarray:
        frames = _check_frames(frames)
        nchw = np.ascontiguousarray(np.transpose(frames, (0, 3, 1, 2)))
        feeds = {self._image.input_names[0]: nchw}
        out = self._image.run(feeds)[self._image.output_names[0]]
        return np.asarray(out, dtype=np.float32)


def load_backend(spec: EncoderSpec):
    if spec.backend == "file":
        return FileBackend(spec)
    return OnnxBackend(spec)
