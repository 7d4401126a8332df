"""Dataset manifests: a classes file plus one split file per test split.

The classes file lists raw class ids, one per line, in class-index order.
Each split file is line-oriented text, `<relative-path>\\t<class-id>`,
matching the public split-file shape of the standard action benchmarks.
Sample paths resolve against a root directory and are validated lazily,
when the sample is actually loaded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestError
from .labels import LabelSpace


@dataclass
class Sample:
    relpath: str
    class_index: int


@dataclass
class DatasetManifest:
    name: str
    classes: LabelSpace
    splits: list[list[Sample]]
    root: str = "."
    # source files, when loaded from disk; lets a report snapshot re-run
    classes_file: str = ""
    split_files: list[str] = field(default_factory=list)

    def resolve(self, sample: Sample) -> Path:
        return Path(self.root) / sample.relpath

    @property
    def total_samples(self) -> int:
        return sum(len(s) for s in self.splits)


def load_split_file(path: str | Path, n_classes: int) -> list[Sample]:
    samples: list[Sample] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ManifestError(f"{path}:{lineno}: expected '<path>\\t<class-id>'")
        relpath, class_id = parts
        try:
            index = int(class_id)
        except ValueError as exc:
            raise ManifestError(f"{path}:{lineno}: class id {class_id!r} is not an integer") from exc
        if not 0 <= index < n_classes:
            raise ManifestError(
                f"{path}:{lineno}: class id {index} outside [0, {n_classes})"
            )
        samples.append(Sample(relpath=relpath, class_index=index))
    if not samples:
        raise ManifestError(f"{path}: split file lists no samples")
    return samples


def load_manifest(name: str, classes_file: str | Path,
                  split_files: list[str | Path], root: str = ".") -> DatasetManifest:
    classes = LabelSpace.from_file(classes_file)
    if not split_files:
        raise ManifestError("at least one split file is required")
    splits = [load_split_file(p, len(classes)) for p in split_files]
    return DatasetManifest(
        name=name, classes=classes, splits=splits, root=root,
        classes_file=str(classes_file), split_files=[str(p) for p in split_files],
    )
