"""Command-line entry point.

Subcommands: gen-descriptors, embed-classes, classify, evaluate, ablate.
Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 environment
error (missing files or API key). Failures print a single
"<ErrorClass>: <message>" line to stderr so wrappers can parse them.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import config as cfgmod
from .backend import load_backend
from .classifier import dump_class_embeddings
from .descriptors import DescriptorCache, generate_all
from .errors import (
    ConfigError,
    ManifestError,
    MissingApiKeyError,
    ZsarError,
)
from .evaluation import (
    ablate_backbone_frames,
    ablate_descriptors,
    ablate_llm,
    ablate_prompt_grid,
    build_class_embeddings,
    collect_descriptor_sets,
    evaluate,
)
from .labels import LabelSpace
from .llm import HttpChatTransport
from .video import load_sample
from .classifier import predict, video_embedding
from .evaluation import normalize_rows

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_ENVIRONMENT = 3


class EnvironmentProblem(Exception):
    """Missing file or credential; maps to exit code 3."""


def _bool_flag(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zsar",
        description="Zero-shot video action recognition with LLM class descriptors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, dataset: bool = False):
        p.add_argument("--config", help="YAML run configuration file")
        p.add_argument("--backend", choices=["onnx", "file"])
        p.add_argument("--backbone", help="encoder tag, e.g. ViT-B/16")
        p.add_argument("--frames", type=int, help="frames sampled per video")
        p.add_argument("--kinds", help="comma-separated descriptor kinds")
        p.add_argument("--templates", help="template file (one per line)")
        p.add_argument("--prepend-class", dest="prepend_class", type=_bool_flag)
        p.add_argument("--use-templates", dest="use_templates", type=_bool_flag)
        p.add_argument("--workers", type=int)
        p.add_argument("--cache", help="descriptor cache JSON path")
        p.add_argument("--format", choices=["json", "table"], default="table")
        p.add_argument("--dry-run", action="store_true",
                       help="validate configuration, touch nothing")
        if dataset:
            p.add_argument("--classes", help="classes file (raw ids, index order)")
            p.add_argument("--manifest", action="append",
                           help="split manifest file; repeat for more splits")

    p = sub.add_parser("gen-descriptors", help="generate and cache class descriptors")
    common(p, dataset=True)

    p = sub.add_parser("embed-classes", help="precompute class embeddings to a table file")
    common(p, dataset=True)
    p.add_argument("--out", required=True, help="output embedding-table path")

    p = sub.add_parser("classify", help="classify one video")
    common(p, dataset=True)
    p.add_argument("--video", help="video file or frame directory")

    p = sub.add_parser("evaluate", help="run a full evaluation")
    common(p, dataset=True)
    p.add_argument("--out", help="report output path (JSON)")

    p = sub.add_parser("ablate", help="run an ablation grid")
    common(p, dataset=True)
    p.add_argument("--grid", required=True,
                   choices=["descriptors", "prompts", "backbone-frames", "llm"])
    p.add_argument("--llm-ids", help="comma-separated model ids for --grid llm")
    p.add_argument("--out", help="table output path (JSON)")
    return parser


def _load_run_config(args, need_dataset: bool = True):
    data = cfgmod.load_config_dict(args.config) if args.config else {"_base_dir": "."}
    data = cfgmod.apply_overrides(data, args)
    if need_dataset and "dataset" not in data:
        raise UsageProblem("a dataset is required: pass --config with a dataset "
                           "section or --classes/--manifest")
    return cfgmod.build_run_config(data)


class UsageProblem(Exception):
    """Bad flag combination; maps to exit code 2."""


def _check_environment(cfg, need_backend: bool, need_llm_key: bool) -> None:
    missing = []
    if need_backend:
        for path in cfg.encoder.required_paths():
            if not path or not Path(path).exists():
                missing.append(path or "<unset model path>")
    if missing:
        raise EnvironmentProblem(
            "missing encoder file(s): " + ", ".join(repr(m) for m in missing)
        )
    if need_llm_key and not os.environ.get(cfg.llm.api_key_env_var, ""):
        raise EnvironmentProblem(
            f"environment variable {cfg.llm.api_key_env_var} is not set"
        )


def _descriptors_warm(cfg) -> bool:
    cache = DescriptorCache(cfg.cache_path)
    return all(
        cache.get(action, cfg.llm.model_id) is not None
        for action in cfg.dataset.classes
    )


def cmd_gen_descriptors(args) -> int:
    cfg = _load_run_config(args)
    warm = _descriptors_warm(cfg)
    if args.dry_run:
        _check_environment(cfg, need_backend=False, need_llm_key=not warm)
        print("dry run ok: configuration valid")
        return EXIT_OK
    _check_environment(cfg, need_backend=False, need_llm_key=not warm)
    cache = DescriptorCache(cfg.cache_path)
    result = generate_all(
        cfg.dataset.classes, cfg.llm, cache,
        transport=HttpChatTransport(cfg.llm), workers=cfg.workers,
    )
    print(f"descriptors ready for {len(result.sets)} class(es) in {cfg.cache_path}")
    for action, exc in sorted(result.failures.items(), key=lambda kv: kv[0].display):
        print(f"failed {action.display}: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_RUNTIME if result.failures else EXIT_OK


def cmd_embed_classes(args) -> int:
    cfg = _load_run_config(args)
    if args.dry_run:
        _check_environment(cfg, need_backend=True, need_llm_key=False)
        print("dry run ok: configuration valid")
        return EXIT_OK
    _check_environment(cfg, need_backend=True, need_llm_key=False)
    sets = collect_descriptor_sets(cfg)
    backend = load_backend(cfg.encoder)
    classes = build_class_embeddings(cfg, backend, sets)
    dump_class_embeddings(classes, args.out, cfg.encoder.embed_dim)
    print(f"wrote {len(classes)} class embeddings to {args.out}")
    return EXIT_OK


def cmd_classify(args) -> int:
    if not args.video:
        raise UsageProblem("classify requires --video")
    cfg = _load_run_config(args)
    if args.dry_run:
        _check_environment(cfg, need_backend=True, need_llm_key=False)
        print("dry run ok: configuration valid")
        return EXIT_OK
    _check_environment(cfg, need_backend=True, need_llm_key=False)
    sets = collect_descriptor_sets(cfg)
    backend = load_backend(cfg.encoder)
    classes = build_class_embeddings(cfg, backend, sets)
    video = load_sample(args.video, cfg.frames, cfg.sampling_anchor)
    rows = normalize_rows(backend.encode_frames(video.frames),
                            cfg.normalize_before_average)
    pred = predict(video_embedding(rows), classes)
    k = min(5, len(pred.ranking))
    if args.format == "json":
        print(json.dumps({
            "video": args.video,
            "top": [
                {"class": a.display, "score": s} for a, s in pred.ranking[:k]
            ],
        }, indent=2))
    else:
        for rank, (action, score) in enumerate(pred.ranking[:k], 1):
            print(f"{rank}. {action.display}  {score:.4f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if not args.config and not (args.classes and args.manifest):
        raise UsageProblem("evaluate requires --config or --classes plus --manifest")
    cfg = _load_run_config(args)
    warm = _descriptors_warm(cfg)
    if args.dry_run:
        _check_environment(cfg, need_backend=True, need_llm_key=not warm)
        print("dry run ok: configuration valid")
        return EXIT_OK
    _check_environment(cfg, need_backend=True, need_llm_key=not warm)
    transport = None if warm else HttpChatTransport(cfg.llm)
    report = evaluate(cfg, transport)
    if args.out:
        report.save(args.out)
    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.render())
    return EXIT_OK


def cmd_ablate(args) -> int:
    if args.grid == "llm" and not args.llm_ids:
        raise UsageProblem("--grid llm requires --llm-ids")
    cfg = _load_run_config(args)
    warm = _descriptors_warm(cfg)
    if args.dry_run:
        _check_environment(cfg, need_backend=True, need_llm_key=not warm)
        print("dry run ok: configuration valid")
        return EXIT_OK
    _check_environment(cfg, need_backend=True,
                       need_llm_key=not warm or args.grid == "llm")
    transport = None if warm else HttpChatTransport(cfg.llm)
    if args.grid == "descriptors":
        table = ablate_descriptors(cfg, transport)
    elif args.grid == "prompts":
        table = ablate_prompt_grid(cfg, transport)
    elif args.grid == "backbone-frames":
        table = ablate_backbone_frames(cfg, transport=transport)
    else:
        ids = [s.strip() for s in args.llm_ids.split(",") if s.strip()]
        table = ablate_llm(
            cfg, ids, transport_factory=lambda llm: HttpChatTransport(llm)
        )
    if args.out:
        table.save(args.out)
    if args.format == "json":
        print(json.dumps(table.to_dict(), indent=2, sort_keys=True))
    else:
        print(table.render())
    return EXIT_OK


_COMMANDS = {
    "gen-descriptors": cmd_gen_descriptors,
    "embed-classes": cmd_embed_classes,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageProblem as exc:
        print(f"UsageError: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EnvironmentProblem, MissingApiKeyError, FileNotFoundError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    except (ConfigError, ManifestError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ZsarError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
