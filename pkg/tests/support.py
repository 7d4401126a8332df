"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from zsar.assembly import DescriptorConfig, DescriptorKind
from zsar.backend import EncoderSpec, frame_key
from zsar.descriptors import DescriptorCache
from zsar.descriptors import (
    CONTEXT_QUERY,
    DECOMPOSITION_QUERY,
    DESCRIPTION_QUERY,
    DescriptorSet,
)
from zsar.errors import TransportError
from zsar.evaluation import RunConfig
from zsar.labels import ActionClass, LabelSpace
from zsar.llm import LlmConfig
from zsar.manifest import DatasetManifest, Sample
from zsar.onnx_proto import FLOAT, INT64, Graph, Model, Node, TensorInfo
from zsar.preprocess import preprocess_image
from zsar.video import load_sample
from zsar.vectable import write_table

SNOW_STEPS = [
    "Strap your feet securely onto the snowboard bindings",
    "Lean forward to initiate movement down the slope",
    "Use heel-to-toe shifts in weight to steer and balance as you descend",
]
SNOW_DESCRIPTION = (
    "A person sliding down a snow-covered slope on a single board attached to "
    "their feet, making turns and jumps while maintaining balance."
)
SNOW_CONTEXT = "snow-covered mountain slope or snow park"
SNOW_OBJECTS = ["snowboard", "snow boots", "helmet"]


def snowboarding_set(model_id: str = "test-model") -> DescriptorSet:
    return DescriptorSet(
        action=ActionClass.from_raw("snowboarding"),
        decomposition=list(SNOW_STEPS),
        description=SNOW_DESCRIPTION,
        context=SNOW_CONTEXT,
        objects=list(SNOW_OBJECTS),
        llm_model_id=model_id,
        generated_at="2024-01-01T00:00:00+00:00",
    )


class MockTransport:
    """Scripted chat transport: answers by query kind, counts every call."""

    def __init__(self, decomposition="['a', 'b', 'c']",
                 description="A person doing something.",
                 context="{'context': 'a place', 'objects': ['thing']}",
                 per_label: dict | None = None,
                 fail_labels: set | None = None):
        self.calls: list[tuple[str, str]] = []
        self.decomposition = decomposition
        self.description = description
        self.context = context
        self.per_label = per_label or {}
        self.fail_labels = fail_labels or set()

    def kind_of(self, system: str) -> str:
        if system == DECOMPOSITION_QUERY:
            return "decomposition"
        if system == DESCRIPTION_QUERY:
            return "description"
        if system == CONTEXT_QUERY:
            return "context"
        raise AssertionError("unknown system prompt")

    def complete(self, system: str, user: str) -> str:
        kind = self.kind_of(system)
        self.calls.append((kind, user))
        if user in self.fail_labels and kind == "decomposition":
            return "I cannot answer that."
        override = self.per_label.get(user, {})
        return override.get(kind, getattr(self, kind))

    def count(self, kind: str | None = None, user: str | None = None) -> int:
        return sum(
            1 for k, u in self.calls
            if (kind is None or k == kind) and (user is None or u == user)
        )


class FailingTransport:
    def complete(self, system: str, user: str) -> str:
        raise TransportError("network down")


def random_vectors(texts: list[str], dim: int, seed: int = 0) -> dict[bytes, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {
        t.encode("utf-8"): rng.standard_normal(dim).astype(np.float32) for t in texts
    }


def constant_frame(value: int) -> np.ndarray:
    """A preprocessed frame from a constant-color uint8 image."""
    img = np.full((64, 80, 3), value % 256, dtype=np.uint8)
    return preprocess_image(img)


def write_frame_dir(directory: Path, count: int, start_value: int = 0,
                    size=(64, 80)) -> Path:
    """Write count constant-color frame images: frame_000000.png ..."""
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        arr = np.full((size[0], size[1], 3), (start_value + i * 5) % 256, np.uint8)
        Image.fromarray(arr).save(directory / f"frame_{i:06d}.png")
    return directory


def write_tiny_merges(path: Path, merges: list[tuple[str, str]] | None = None) -> Path:
    lines = ["#version: test"]
    for a, b in merges or [("t", "h"), ("th", "e</w>"), ("a", "n"), ("an", "d</w>")]:
        lines.append(f"{a} {b}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def build_text_tower(vocab_size: int, ctx: int, dim: int, seed: int = 0) -> Model:
    """Tiny text encoder: token embedding -> mean pool -> projection."""
    rng = np.random.default_rng(seed)
    width = 16
    graph = Graph(
        name="text_tower",
        inputs=[TensorInfo("tokens", INT64, ("batch", ctx))],
        outputs=[TensorInfo("text_embedding", FLOAT, ("batch", dim))],
        initializers={
            "token_embedding": rng.standard_normal((vocab_size, width)).astype(np.float32),
            "projection": rng.standard_normal((width, dim)).astype(np.float32),
        },
        nodes=[
            Node("Gather", ["token_embedding", "tokens"], ["embedded"], {"axis": 0}),
            Node("ReduceMean", ["embedded"], ["pooled"], {"axes": [1], "keepdims": 0}),
            Node("MatMul", ["pooled", "projection"], ["text_embedding"]),
        ],
    )
    return Model(graph=graph)


def build_image_tower(dim: int, seed: int = 1) -> Model:
    """Tiny image encoder: spatial mean per channel -> affine projection."""
    rng = np.random.default_rng(seed)
    graph = Graph(
        name="image_tower",
        inputs=[TensorInfo("image", FLOAT, ("batch", 3, 224, 224))],
        outputs=[TensorInfo("image_embedding", FLOAT, ("batch", dim))],
        initializers={
            "projection": rng.standard_normal((3, dim)).astype(np.float32),
            "bias": rng.standard_normal(dim).astype(np.float32),
        },
        nodes=[
            Node("ReduceMean", ["image"], ["pooled"], {"axes": [2, 3], "keepdims": 0}),
            Node("MatMul", ["pooled", "projection"], ["projected"]),
            Node("Add", ["projected", "bias"], ["image_embedding"]),
        ],
    )
    return Model(graph=graph)


def write_text_table(path: Path, texts: list[str], dim: int, seed: int = 0,
                     extra: dict[bytes, np.ndarray] | None = None) -> dict[bytes, np.ndarray]:
    table = random_vectors(texts, dim, seed)
    if extra:
        table.update(extra)
    write_table(path, table, dim)
    return table


def frame_table_entries(frames: list[np.ndarray], vectors: list[np.ndarray]) -> dict[bytes, np.ndarray]:
    return {
        frame_key(f): np.asarray(v, dtype=np.float32) for f, v in zip(frames, vectors)
    }


def write_corpus(path: Path, entries: list[dict]) -> None:
    path.write_text(json.dumps(entries, indent=2), encoding="utf-8")


# --- evaluation fixture -----------------------------------------------------

from dataclasses import replace  # noqa: E402

DIM = 8
RAW_IDS = ["Snowboarding", "Surfing", "Bowling", "Typing", "Kissing"]

# Descriptor content per class; single words so templated variants stay short.
def descriptor_entry(i):
    return {
        "decomposition": [f"step{i}a", f"step{i}b", f"step{i}c"],
        "description": f"description {i}",
        "context": f"context {i}",
        "objects": [f"object{i}"],
    }


def seed_cache(path, model_id="test-model"):
    cache = DescriptorCache(path)
    for i, raw in enumerate(RAW_IDS):
        entry = descriptor_entry(i)
        cache.put(
            DescriptorSet(
                action=ActionClass.from_raw(raw),
                decomposition=entry["decomposition"],
                description=entry["description"],
                context=entry["context"],
                objects=entry["objects"],
                llm_model_id=model_id,
                generated_at="2024-01-01T00:00:00+00:00",
            )
        )
    return cache


def all_possible_texts(templates=("a video of {}.",)):
    """Every text any (kinds, prepend, templates) cell can ask the encoder for."""
    texts = set()
    for i, raw in enumerate(RAW_IDS):
        display = ActionClass.from_raw(raw).display
        entry = descriptor_entry(i)
        base = [display, *entry["decomposition"], entry["description"],
                entry["context"], *entry["objects"]]
        for t in base:
            for candidate in (t, f"{display}. {t}" if t != display else t):
                texts.add(candidate)
                for tpl in templates:
                    texts.add(tpl.replace("{}", candidate, 1))
    return sorted(texts)


class Fixture:
    """4-video / 5-class file-backend evaluation fixture.

    Class text embeddings are scaled basis vectors; video frames map to the
    basis vector of their intended predicted class, so Top-1 outcomes are
    dictated exactly.
    """

    def __init__(self, tmp_path, frames_per_video=2):
        self.root = tmp_path
        self.frames_per_video = frames_per_video
        rng = np.random.default_rng(42)

        self.table: dict[bytes, np.ndarray] = {}
        for j, text in enumerate(all_possible_texts()):
            vec = np.zeros(DIM, np.float32)
            vec[j % 5] = 1.0
            vec += rng.normal(0, 0.01, DIM).astype(np.float32)
            self.table[text.encode("utf-8")] = vec
        # class texts (kinds=class, no prepend, no templates) pin the basis
        for i, raw in enumerate(RAW_IDS):
            display = ActionClass.from_raw(raw).display
            basis = np.zeros(DIM, np.float32)
            basis[i] = 1.0
            self.table[display.encode("utf-8")] = basis

        # videos: (name, truth index, predicted-class index)
        self.videos = [("v0", 0, 0), ("v1", 1, 1), ("v2", 2, 2), ("v3", 3, 4)]
        for name, _truth, target in self.videos:
            directory = write_frame_dir(
                tmp_path / name, frames_per_video,
                start_value=17 * (target + 1) + len(name),
            )
            sample = load_sample(directory, frames_per_video)
            basis = np.zeros(DIM, np.float32)
            basis[target] = 1.0
            for frame in sample.frames:
                self.table[frame_key(frame)] = basis

        self.table_path = tmp_path / "table.bin"
        write_table(self.table_path, self.table, DIM)
        self.cache_path = tmp_path / "cache.json"
        seed_cache(self.cache_path)

    def encoder(self, tag="custom"):
        return EncoderSpec(
            backend="file",
            model_tag=tag,
            embed_dim=DIM,
            embedding_table_path=str(self.table_path),
        )

    def manifest(self, splits=None):
        samples = {
            name: Sample(relpath=name, class_index=truth)
            for name, truth, _ in self.videos
        }
        if splits is None:
            splits = [[samples["v0"], samples["v1"], samples["v2"], samples["v3"]]]
        else:
            splits = [[samples[n] for n in split] for split in splits]
        return DatasetManifest(
            name="fixture",
            classes=LabelSpace.from_raw_ids(RAW_IDS),
            splits=splits,
            root=str(self.root),
        )

    def run_config(self, **overrides):
        base = RunConfig(
            encoder=self.encoder(),
            dataset=self.manifest(),
            descriptor_cfg=DescriptorConfig(
                kinds=(DescriptorKind.CLASS,),
                prepend_class=False,
                use_templates=False,
            ),
            llm=LlmConfig(model_id="test-model"),
            cache_path=str(self.cache_path),
            frames=self.frames_per_video,
        )
        return replace(base, **overrides) if overrides else base


