"""Run configuration file handling.

One YAML document describes a run: encoder, dataset, descriptor settings,
LLM settings, and the sampling/aggregation knobs. Command-line flags
override individual fields; relative paths resolve against the config
file's own directory so a config directory is relocatable.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .assembly import DescriptorConfig, load_templates
from .backend import EncoderSpec
from .errors import ConfigError
from .evaluation import RunConfig
from .llm import LlmConfig
from .manifest import DatasetManifest, load_manifest


def load_config_dict(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file does not exist: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    data["_base_dir"] = str(path.parent)
    return data


def _resolve(base_dir: str, value: str | None) -> str:
    if not value:
        return ""
    p = Path(value)
    return str(p if p.is_absolute() else Path(base_dir) / p)


def build_encoder(data: dict, base_dir: str) -> EncoderSpec:
    try:
        return EncoderSpec(
            backend=data.get("backend", "file"),
            model_tag=data.get("model_tag", "custom"),
            embed_dim=int(data.get("embed_dim", 512)),
            text_model_path=_resolve(base_dir, data.get("text_model_path")),
            image_model_path=_resolve(base_dir, data.get("image_model_path")),
            embedding_table_path=_resolve(base_dir, data.get("embedding_table_path")),
            tokenizer_path=_resolve(base_dir, data.get("tokenizer_path")),
            context_length=int(data.get("context_length", 77)),
        )
    except ValueError as exc:
        raise ConfigError(f"encoder: {exc}") from exc


def build_descriptor_config(data: dict, base_dir: str) -> DescriptorConfig:
    templates: tuple[str, ...] = ()
    templates_file = data.get("templates_file")
    if templates_file:
        templates = tuple(load_templates(_resolve(base_dir, templates_file)))
    try:
        return DescriptorConfig(
            kinds=tuple(data.get("kinds", ["combination"])),
            prepend_class=bool(data.get("prepend_class", True)),
            use_templates=bool(data.get("use_templates", True)),
            templates=templates,
        )
    except ValueError as exc:
        raise ConfigError(f"descriptors: {exc}") from exc


def build_llm(data: dict) -> LlmConfig:
    try:
        return LlmConfig(
            endpoint_url=data.get(
                "endpoint_url", "https://api.openai.com/v1/chat/completions"
            ),
            model_id=data.get("model_id", "gpt-3.5-turbo"),
            temperature=float(data.get("temperature", 0.0)),
            max_retries=int(data.get("max_retries", 3)),
            timeout_s=float(data.get("timeout_s", 30.0)),
            api_key_env_var=data.get("api_key_env_var", "OPENAI_API_KEY"),
        )
    except ValueError as exc:
        raise ConfigError(f"llm: {exc}") from exc


def build_dataset(data: dict, base_dir: str) -> DatasetManifest:
    classes_file = data.get("classes_file")
    split_files = data.get("split_files", [])
    if not classes_file:
        raise ConfigError("dataset: classes_file is required")
    if not split_files:
        raise ConfigError("dataset: split_files must list at least one split")
    return load_manifest(
        name=data.get("name", "dataset"),
        classes_file=_resolve(base_dir, classes_file),
        split_files=[_resolve(base_dir, p) for p in split_files],
        root=_resolve(base_dir, data.get("root", ".")),
    )


def build_run_config(data: dict) -> RunConfig:
    base_dir = data.get("_base_dir", ".")
    if "dataset" not in data:
        raise ConfigError("config is missing the 'dataset' section")
    alt = [
        build_encoder(e, base_dir) for e in data.get("alt_encoders", [])
    ]
    return RunConfig(
        encoder=build_encoder(data.get("encoder", {}), base_dir),
        dataset=build_dataset(data["dataset"], base_dir),
        descriptor_cfg=build_descriptor_config(data.get("descriptors", {}), base_dir),
        llm=build_llm(data.get("llm", {})),
        cache_path=_resolve(base_dir, data.get("cache", "descriptors.json")),
        frames=int(data.get("frames", 16)),
        seed=int(data.get("seed", 0)),
        workers=int(data.get("workers", 1)),
        sampling_anchor=data.get("sampling_anchor", "start"),
        normalize_before_average=bool(data.get("normalize_before_average", False)),
        max_failure_rate=float(data.get("max_failure_rate", 0.01)),
        alt_encoders=alt,
    )


def run_config_from_snapshot(snapshot: dict) -> RunConfig:
    """Rebuild a runnable configuration from a report's config snapshot.

    Requires the snapshot's dataset to carry its source files (it does for
    any run loaded from disk). The LLM endpoint settings are defaults: a
    snapshot re-run expects a warm descriptor cache.
    """
    ds = snapshot["dataset"]
    if not ds.get("classes_file"):
        raise ConfigError("snapshot's dataset has no source files to reload from")
    dataset = load_manifest(
        name=ds.get("name", "dataset"),
        classes_file=ds["classes_file"],
        split_files=ds["split_files"],
        root=ds.get("root", "."),
    )
    desc = snapshot["descriptors"]
    return RunConfig(
        encoder=EncoderSpec(**snapshot["encoder"]),
        dataset=dataset,
        descriptor_cfg=DescriptorConfig(
            kinds=tuple(desc["kinds"]),
            prepend_class=desc["prepend_class"],
            use_templates=desc["use_templates"],
            templates=tuple(desc.get("templates", ())),
        ),
        llm=LlmConfig(model_id=snapshot["llm_model_id"]),
        cache_path=snapshot["cache_path"],
        frames=snapshot["frames"],
        seed=snapshot.get("seed", 0),
        workers=snapshot.get("workers", 1),
        sampling_anchor=snapshot.get("sampling_anchor", "start"),
        normalize_before_average=snapshot.get("normalize_before_average", False),
        max_failure_rate=snapshot.get("max_failure_rate", 0.01),
    )


def apply_overrides(data: dict, args) -> dict:
    """Merge command-line flags into a config dict; flags win."""
    if getattr(args, "backend", None):
        data.setdefault("encoder", {})["backend"] = args.backend
    if getattr(args, "backbone", None):
        data.setdefault("encoder", {})["model_tag"] = args.backbone
    if getattr(args, "frames", None):
        data["frames"] = args.frames
    if getattr(args, "workers", None):
        data["workers"] = args.workers
    if getattr(args, "cache", None):
        data["cache"] = str(Path(args.cache).absolute())
    if getattr(args, "classes", None):
        data.setdefault("dataset", {})["classes_file"] = str(Path(args.classes).absolute())
    if getattr(args, "manifest", None):
        data.setdefault("dataset", {})["split_files"] = [
            str(Path(p).absolute()) for p in args.manifest
        ]
    if getattr(args, "kinds", None):
        data.setdefault("descriptors", {})["kinds"] = [
            k.strip() for k in args.kinds.split(",") if k.strip()
        ]
    if getattr(args, "templates", None):
        data.setdefault("descriptors", {})["templates_file"] = str(
            Path(args.templates).absolute()
        )
    if getattr(args, "prepend_class", None) is not None:
        data.setdefault("descriptors", {})["prepend_class"] = args.prepend_class
    if getattr(args, "use_templates", None) is not None:
        data.setdefault("descriptors", {})["use_templates"] = args.use_templates
    return data
