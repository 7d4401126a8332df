"""Command line for the one-shot checkpoint exporter."""

from __future__ import annotations

import argparse
import sys

from zsar.errors import ZsarError

from .arch import CONFIGS
from .export import ExportManifest, ExportVerificationError, export, verify_export


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="encoder-export",
        description="Convert a dual-encoder checkpoint to ONNX towers with "
        "golden-embedding verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="convert a checkpoint")
    p.add_argument("--tag", required=True, choices=sorted(CONFIGS))
    p.add_argument("--checkpoint", required=True, help="state-dict .pt file")
    p.add_argument("--merges", required=True, help="BPE merges file (.txt or .gz)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-verify", action="store_true")

    p = sub.add_parser("verify", help="re-verify an existing export")
    p.add_argument("--manifest", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "export":
            manifest = export(
                args.tag, args.checkpoint, args.merges, args.out,
                verify=not args.no_verify,
            )
            print(f"exported {args.tag}: dim={manifest.embed_dim}")
            print(f"  text tower:  {manifest.text_model_path}")
            print(f"  image tower: {manifest.image_model_path}")
        else:
            report = verify_export(ExportManifest.load(args.manifest))
            print(
                "verification ok: "
                f"text err {report['text_max_abs_err']:.2e}, "
                f"image err {report['image_max_abs_err']:.2e}"
            )
    except (ExportVerificationError, ZsarError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, KeyError, ValueError, TypeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
