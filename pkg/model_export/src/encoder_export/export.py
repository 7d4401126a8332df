"""Checkpoint-to-ONNX export with golden-embedding verification.

export() converts one backbone checkpoint into text/image ONNX towers,
dumps golden reference embeddings for a fixed fixture set (three
sentences, one of them over-length; three images, one constant-color),
and verifies that the inference package, loading the exported files
through its public backend, reproduces the reference embeddings within
the stated per-component tolerance. Verification failure raises: a bad
export never leaves a manifest behind.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .arch import CONFIGS, TowerConfig, load_dual_encoder
from .bpe import Tokenizer
from .graphs import build_image_tower, build_text_tower
from .tablewrite import frame_hash_key, write_table

GOLDEN_TOLERANCE = 1e-4

GOLDEN_SENTENCES = [
    "a photo of a person snowboarding.",
    "the quick brown fox jumps over the lazy dog.",
    # over-length on purpose: exercises context-window truncation
    " ".join(["a very long caption that keeps going"] * 12),
]


class ExportVerificationError(RuntimeError):
    pass


@dataclass
class ExportManifest:
    model_tag: str
    embed_dim: int
    context_length: int
    text_model_path: str
    image_model_path: str
    tokenizer_path: str
    golden_text_table: str
    golden_image_table: str
    golden_sentences: list[str]
    golden_image_files: list[str]
    tolerance: float

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "ExportManifest":
        return cls(**json.loads(Path(path).read_text()))


def golden_images() -> list[np.ndarray]:
    """Three deterministic preprocessed frames: constant, gradient, checker."""
    mean = np.array([0.48145466, 0.4578275, 0.40821073], dtype=np.float32)
    std = np.array([0.26862954, 0.26130258, 0.27577711], dtype=np.float32)

    def norm(u8):
        return ((u8.astype(np.float32) / 255.0) - mean) / std

    constant = np.full((224, 224, 3), 128, np.uint8)
    ramp = np.linspace(0, 255, 224, dtype=np.uint8)
    gradient = np.stack(
        [np.tile(ramp, (224, 1)), np.tile(ramp[::-1], (224, 1)),
         np.tile(ramp, (224, 1)).T], axis=-1,
    )
    yy, xx = np.mgrid[0:224, 0:224]
    checker = (((yy // 16 + xx // 16) % 2) * 255).astype(np.uint8)
    checker = np.stack([checker, checker, 255 - checker], axis=-1)
    return [norm(constant), norm(gradient), norm(checker)]


def load_checkpoint(path: str | Path) -> dict:
    """Load a state dict from a plain torch save or a scripted archive."""
    path = Path(path)
    try:
        obj = torch.load(path, map_location="cpu", weights_only=True)
    except Exception:
        obj = torch.jit.load(str(path), map_location="cpu").state_dict()
    if hasattr(obj, "state_dict"):
        obj = obj.state_dict()
    if not isinstance(obj, dict):
        raise TypeError(f"{path} does not contain a state dict")
    return obj


def export(model_tag: str, checkpoint_path: str | Path, merges_path: str | Path,
           out_dir: str | Path, verify: bool = True) -> ExportManifest:
    if model_tag not in CONFIGS:
        raise ValueError(f"unknown model tag {model_tag!r}; have {sorted(CONFIGS)}")
    cfg = CONFIGS[model_tag]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    state_dict = load_checkpoint(checkpoint_path)
    ckpt_dim = int(state_dict["text_projection"].shape[1])
    if ckpt_dim != cfg.embed_dim or int(state_dict["visual.proj"].shape[1]) != ckpt_dim:
        raise ExportVerificationError(
            f"checkpoint projection dimension {ckpt_dim} does not match "
            f"{model_tag}'s embedding dimension {cfg.embed_dim}"
        )
    model = load_dual_encoder(cfg, state_dict)
    tokenizer = Tokenizer(merges_path, cfg.context_length)
    expected_vocab = state_dict["token_embedding.weight"].shape[0]
    if tokenizer.vocab_size != expected_vocab:
        raise ExportVerificationError(
            f"tokenizer vocabulary ({tokenizer.vocab_size}) does not match the "
            f"checkpoint's token embedding rows ({expected_vocab})"
        )

    tag = model_tag.replace("/", "-").replace(":", "-").lower()
    text_path = out_dir / f"{tag}.text.onnx"
    image_path = out_dir / f"{tag}.image.onnx"
    text_path.write_bytes(build_text_tower(cfg, state_dict))
    image_path.write_bytes(build_image_tower(cfg, state_dict))
    tok_path = out_dir / Path(merges_path).name
    if Path(merges_path).resolve() != tok_path.resolve():
        shutil.copyfile(merges_path, tok_path)

    # golden reference embeddings from the torch model
    tokens = tokenizer.batch(GOLDEN_SENTENCES)
    text_ref = model.encode_text(tokens).numpy().astype(np.float32)
    frames = golden_images()
    image_in = torch.from_numpy(
        np.transpose(np.stack(frames), (0, 3, 1, 2)).copy()
    )
    image_ref = model.encode_image(image_in).numpy().astype(np.float32)

    text_table_path = out_dir / f"{tag}.golden-text.embt"
    image_table_path = out_dir / f"{tag}.golden-image.embt"
    write_table(
        text_table_path,
        {s.encode("utf-8"): v for s, v in zip(GOLDEN_SENTENCES, text_ref)},
        cfg.embed_dim,
    )
    write_table(
        image_table_path,
        {frame_hash_key(f): v for f, v in zip(frames, image_ref)},
        cfg.embed_dim,
    )
    image_files = []
    for i, frame in enumerate(frames):
        p = out_dir / f"{tag}.golden-frame{i}.npy"
        np.save(p, frame)
        image_files.append(str(p))

    manifest = ExportManifest(
        model_tag=model_tag,
        embed_dim=cfg.embed_dim,
        context_length=cfg.context_length,
        text_model_path=str(text_path),
        image_model_path=str(image_path),
        tokenizer_path=str(tok_path),
        golden_text_table=str(text_table_path),
        golden_image_table=str(image_table_path),
        golden_sentences=list(GOLDEN_SENTENCES),
        golden_image_files=image_files,
        tolerance=GOLDEN_TOLERANCE,
    )
    if verify:
        verify_export(manifest)
    manifest.save(out_dir / f"{tag}.manifest.json")
    return manifest


def verify_export(manifest: ExportManifest) -> dict:
    """Run the exported towers through the inference package and compare.

    Returns the worst per-component deviations; raises if any fixture
    exceeds the manifest tolerance.
    """
    from zsar.backend import EncoderSpec, OnnxBackend
    from zsar.vectable import read_table

    spec = EncoderSpec(
        backend="onnx",
        model_tag=manifest.model_tag,
        embed_dim=manifest.embed_dim,
        text_model_path=manifest.text_model_path,
        image_model_path=manifest.image_model_path,
        tokenizer_path=manifest.tokenizer_path,
        context_length=manifest.context_length,
    )
    backend = OnnxBackend(spec)

    _, text_table = read_table(manifest.golden_text_table)
    got_text = backend.encode_texts(manifest.golden_sentences)
    text_devs = [
        np.max(np.abs(got - text_table[sentence.encode("utf-8")]))
        for sentence, got in zip(manifest.golden_sentences, got_text)
    ]
    # np.max propagates NaN where the builtin max would silently drop it
    text_err = float(np.max(text_devs))

    _, image_table = read_table(manifest.golden_image_table)
    frames = np.stack([np.load(p) for p in manifest.golden_image_files])
    got_image = backend.encode_frames(frames)
    image_devs = [
        np.max(np.abs(got - image_table[frame_hash_key(frame)]))
        for frame, got in zip(frames, got_image)
    ]
    image_err = float(np.max(image_devs))

    report = {"text_max_abs_err": text_err, "image_max_abs_err": image_err}
    # NaN must fail, so require the passing condition to hold positively
    within = text_err <= manifest.tolerance and image_err <= manifest.tolerance
    if not within:
        raise ExportVerificationError(
            f"golden fixtures exceed tolerance {manifest.tolerance}: {report}"
        )
    return report
