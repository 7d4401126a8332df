"""Full evaluation runs and the ablation grids built on top of them.

An evaluation computes Top-1/Top-5 accuracy per test split and aggregates
across splits by unweighted mean. Class embeddings are computed once per
run and shared across splits. Samples that fail to decode are excluded
from the denominators and reported; if more than the allowed fraction
fails, the run aborts rather than report a misleading number.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .assembly import DescriptorConfig, DescriptorKind, assemble
from .backend import EncoderSpec, load_backend
from .classifier import ClassEmbedding, predict, topk_hit, video_embedding
from .descriptors import DescriptorCache, DescriptorSet, generate_one
from .errors import (
    DecodeError,
    EmptyVideoError,
    EvalAbortError,
    MissingDescriptorsError,
)
from .llm import ChatTransport, LlmConfig
from .manifest import DatasetManifest, Sample
from .video import load_sample


@dataclass
class RunConfig:
    """Everything a single evaluation run depends on."""

    encoder: EncoderSpec
    dataset: DatasetManifest
    descriptor_cfg: DescriptorConfig = field(default_factory=DescriptorConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    cache_path: str = "descriptors.json"
    frames: int = 16
    seed: int = 0
    workers: int = 1
    sampling_anchor: str = "start"
    normalize_before_average: bool = False
    max_failure_rate: float = 0.01
    alt_encoders: list[EncoderSpec] = field(default_factory=list)

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.max_failure_rate <= 1:
            raise ValueError("max_failure_rate must be in [0, 1]")

    def snapshot(self) -> dict:
        """JSON-serializable snapshot sufficient to reproduce the run."""
        return {
            "encoder": vars(self.encoder).copy(),
            "dataset": {
                "name": self.dataset.name,
                "root": self.dataset.root,
                "classes_file": self.dataset.classes_file,
                "split_files": list(self.dataset.split_files),
                "n_classes": len(self.dataset.classes),
                "split_sizes": [len(s) for s in self.dataset.splits],
            },
            "descriptors": {
                "kinds": [k.value for k in self.descriptor_cfg.kinds],
                "prepend_class": self.descriptor_cfg.prepend_class,
                "use_templates": self.descriptor_cfg.use_templates,
                "templates": list(self.descriptor_cfg.templates),
            },
            "llm_model_id": self.llm.model_id,
            "cache_path": self.cache_path,
            "frames": self.frames,
            "seed": self.seed,
            "workers": self.workers,
            "sampling_anchor": self.sampling_anchor,
            "normalize_before_average": self.normalize_before_average,
            "max_failure_rate": self.max_failure_rate,
        }


@dataclass
class SplitResult:
    top1: float
    top5: float
    n_scored: int
    n_failed: int
    failures: list[str] = field(default_factory=list)


@dataclass
class EvalReport:
    per_split: list[SplitResult]
    aggregate_top1: float
    aggregate_top5: float
    config: dict
    wall_time_s: float
    generated_at: str

    def to_dict(self) -> dict:
        return {
            "per_split": [
                {
                    "top1": s.top1,
                    "top5": s.top5,
                    "n_scored": s.n_scored,
                    "n_failed": s.n_failed,
                    "failures": s.failures,
                }
                for s in self.per_split
            ],
            "aggregate": {"top1": self.aggregate_top1, "top5": self.aggregate_top5},
            "config": self.config,
            "wall_time_s": self.wall_time_s,
            "generated_at": self.generated_at,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )

    def render(self) -> str:
        rows = [
            [f"split{i + 1}", f"{s.top1 * 100:.1f}", f"{s.top5 * 100:.1f}",
             str(s.n_scored), str(s.n_failed)]
            for i, s in enumerate(self.per_split)
        ]
        rows.append([
            "aggregate", f"{self.aggregate_top1 * 100:.1f}",
            f"{self.aggregate_top5 * 100:.1f}",
            str(sum(s.n_scored for s in self.per_split)),
            str(sum(s.n_failed for s in self.per_split)),
        ])
        return render_columns(["split", "top1", "top5", "scored", "failed"], rows)


def render_columns(header: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)


def collect_descriptor_sets(cfg: RunConfig,
                            transport: ChatTransport | None = None
                            ) -> dict[str, DescriptorSet]:
    """Load descriptors for every class from cache, generating misses if possible."""
    cache = DescriptorCache(cfg.cache_path)
    sets: dict[str, DescriptorSet] = {}
    missing: list[str] = []
    for action in cfg.dataset.classes:
        ds = cache.get(action, cfg.llm.model_id)
        if ds is None and transport is not None:
            ds = generate_one(action, cfg.llm, transport)
            cache.put(ds)
        if ds is None:
            missing.append(action.display)
        else:
            sets[action.raw_id] = ds
    if missing:
        raise MissingDescriptorsError(
            f"descriptor cache {cfg.cache_path} is missing {len(missing)} class(es) "
            f"for model {cfg.llm.model_id!r} and no LLM transport is available: "
            + ", ".join(missing),
            missing=missing,
        )
    return sets


def normalize_rows(rows: np.ndarray, enabled: bool) -> np.ndarray:
    if not enabled:
        return rows
    norms = np.linalg.norm(rows.astype(np.float64), axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return rows / norms


def build_class_embeddings(cfg: RunConfig, backend,
                           sets: dict[str, DescriptorSet]) -> list[ClassEmbedding]:
    embeddings = []
    for index, action in enumerate(cfg.dataset.classes):
        batch = assemble(sets[action.raw_id], cfg.descriptor_cfg)
        rows = backend.encode_texts(batch.texts)
        rows = normalize_rows(rows, cfg.normalize_before_average)
        embeddings.append(ClassEmbedding.from_texts(action, rows, index))
    return embeddings


def _score_sample(cfg: RunConfig, backend, classes: list[ClassEmbedding],
                  sample: Sample, k: int):
    path = cfg.dataset.resolve(sample)
    video = load_sample(path, cfg.frames, cfg.sampling_anchor)
    rows = backend.encode_frames(video.frames)
    rows = normalize_rows(rows, cfg.normalize_before_average)
    vbar = video_embedding(rows)
    pred = predict(vbar, classes)
    truth = cfg.dataset.classes[sample.class_index]
    return topk_hit(pred, truth, 1), topk_hit(pred, truth, k)


def evaluate(cfg: RunConfig, transport: ChatTransport | None = None) -> EvalReport:
    """Run a full evaluation and return the per-split and aggregate report."""
    started = time.perf_counter()
    sets = collect_descriptor_sets(cfg, transport)
    backend = load_backend(cfg.encoder)
    classes = build_class_embeddings(cfg, backend, sets)
    k = min(5, len(classes))

    per_split: list[SplitResult] = []
    attempted = 0
    failed_total = 0
    for split in cfg.dataset.splits:
        def score(sample: Sample):
            try:
                return _score_sample(cfg, backend, classes, sample, k)
            except (DecodeError, EmptyVideoError) as exc:
                return exc

        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                outcomes = list(pool.map(score, split))
        else:
            outcomes = [score(s) for s in split]

        hits1 = hits5 = 0
        failures = []
        for sample, outcome in zip(split, outcomes):
            if isinstance(outcome, Exception):
                failures.append(f"{sample.relpath}: {outcome}")
            else:
                hit1, hit5 = outcome
                hits1 += hit1
                hits5 += hit5
        n_scored = len(split) - len(failures)
        attempted += len(split)
        failed_total += len(failures)
        if attempted and failed_total / attempted > cfg.max_failure_rate:
            raise EvalAbortError(
                f"{failed_total}/{attempted} samples failed to decode "
                f"(> {cfg.max_failure_rate:.1%}); first failure: {failures[0]}"
            )
        if n_scored == 0:
            raise EvalAbortError("no sample in split could be scored")
        per_split.append(
            SplitResult(
                top1=hits1 / n_scored,
                top5=hits5 / n_scored,
                n_scored=n_scored,
                n_failed=len(failures),
                failures=failures,
            )
        )

    report = EvalReport(
        per_split=per_split,
        aggregate_top1=float(np.mean([s.top1 for s in per_split])),
        aggregate_top5=float(np.mean([s.top5 for s in per_split])),
        config=cfg.snapshot(),
        wall_time_s=time.perf_counter() - started,
        generated_at=datetime.now(timezone.utc).isoformat(),
    )
    return report


# ---------------------------------------------------------------------------
# ablation grids


@dataclass
class AblationTable:
    """Rows of axis values plus the accuracies the corresponding run produced."""

    columns: list[str]
    rows: list[dict]

    def render(self) -> str:
        cells = [[str(row[c]) for c in self.columns] for row in self.rows]
        return render_columns(self.columns, cells)

    def to_dict(self) -> dict:
        return {"columns": self.columns, "rows": self.rows}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )


_SINGLE_KINDS = (
    DescriptorKind.CLASS,
    DescriptorKind.DESCRIPTION,
    DescriptorKind.DECOMPOSITION,
    DescriptorKind.CONTEXT,
    DescriptorKind.COMBINATION,
)


def _with_kinds(cfg: RunConfig, kinds) -> RunConfig:
    return replace(cfg, descriptor_cfg=replace(cfg.descriptor_cfg, kinds=tuple(kinds)))


def ablate_descriptors(cfg: RunConfig,
                       transport: ChatTransport | None = None) -> AblationTable:
    """Evaluate each descriptor kind on its own."""
    rows = []
    for kind in _SINGLE_KINDS:
        report = evaluate(_with_kinds(cfg, [kind]), transport)
        rows.append(
            {
                "kinds": kind.value,
                "top1": round(report.aggregate_top1, 6),
                "top5": round(report.aggregate_top5, 6),
            }
        )
    return AblationTable(columns=["kinds", "top1", "top5"], rows=rows)


def _encoder_axis(cfg: RunConfig) -> list[EncoderSpec]:
    return [cfg.encoder, *cfg.alt_encoders]


def ablate_prompt_grid(cfg: RunConfig,
                       transport: ChatTransport | None = None) -> AblationTable:
    """Grid over (use_templates, prepend_class) for every configured backbone."""
    rows = []
    for encoder in _encoder_axis(cfg):
        for use_templates in (False, True):
            for prepend_class in (False, True):
                dcfg = replace(
                    cfg.descriptor_cfg,
                    use_templates=use_templates,
                    prepend_class=prepend_class,
                )
                run = replace(cfg, encoder=encoder, descriptor_cfg=dcfg)
                report = evaluate(run, transport)
                rows.append(
                    {
                        "backbone": encoder.model_tag,
                        "templates": use_templates,
                        "class": prepend_class,
                        "top1": round(report.aggregate_top1, 6),
                        "top5": round(report.aggregate_top5, 6),
                    }
                )
    return AblationTable(
        columns=["backbone", "templates", "class", "top1", "top5"], rows=rows
    )


def ablate_backbone_frames(cfg: RunConfig, frame_counts=(16, 32),
                           transport: ChatTransport | None = None) -> AblationTable:
    """Grid over configured backbones x frame-sample counts."""
    rows = []
    for encoder in _encoder_axis(cfg):
        for n in frame_counts:
            run = replace(cfg, encoder=encoder, frames=n)
            report = evaluate(run, transport)
            rows.append(
                {
                    "backbone": encoder.model_tag,
                    "frames": n,
                    "top1": round(report.aggregate_top1, 6),
                    "top5": round(report.aggregate_top5, 6),
                }
            )
    return AblationTable(columns=["backbone", "frames", "top1", "top5"], rows=rows)


def ablate_llm(cfg: RunConfig, llm_ids: list[str],
               transport_factory=None) -> AblationTable:
    """Evaluate each descriptor kind per generator model.

    Each model id gets its own cache file (the base cache path suffixed
    with the model id) so generations never mix. transport_factory maps a
    model id to a ChatTransport used to fill that cache when it is cold.
    """
    rows = []
    base = Path(cfg.cache_path)
    for llm_id in llm_ids:
        safe = "".join(c if c.isalnum() or c in "._-" else "_" for c in llm_id)
        cache_path = base.with_name(f"{base.stem}.{safe}{base.suffix}")
        llm = replace(cfg.llm, model_id=llm_id)
        transport = transport_factory(llm) if transport_factory else None
        for kind in _SINGLE_KINDS[1:]:  # description, decomposition, context, combination
            run = replace(
                _with_kinds(cfg, [kind]), llm=llm, cache_path=str(cache_path)
            )
            report = evaluate(run, transport)
            rows.append(
                {
                    "llm": llm_id,
                    "kinds": kind.value,
                    "top1": round(report.aggregate_top1, 6),
                    "top5": round(report.aggregate_top5, 6),
                }
            )
    return AblationTable(columns=["llm", "kinds", "top1", "top5"], rows=rows)
