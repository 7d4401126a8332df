"""Action class labels and the ordered label space of a dataset."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_SPACES = re.compile(r"\s+")


def normalize_label(raw_id: str) -> str:
    """Turn a dataset-native label id into a natural lowercase phrase.

    Camel-case boundaries and underscores become single spaces and the
    result is lowercased, e.g. "ApplyEyeMakeup" -> "apply eye makeup".
    Idempotent: already-normalized labels pass through unchanged.
    """
    if not raw_id:
        raise ValueError("label id must be non-empty")
    text = raw_id.replace("_", " ").replace("-", " ")
    text = _CAMEL_BOUNDARY.sub(" ", text)
    text = _SPACES.sub(" ", text).strip().lower()
    return text


@dataclass(frozen=True)
class ActionClass:
    """A dataset action class: native id plus its normalized display form."""

    raw_id: str
    display: str

    @classmethod
    def from_raw(cls, raw_id: str) -> "ActionClass":
        return cls(raw_id=raw_id, display=normalize_label(raw_id))


class LabelSpace:
    """Ordered set of action classes; index order is the dataset's class-id order."""

    def __init__(self, classes: list[ActionClass]):
        if not classes:
            raise ValueError("label space must contain at least one class")
        self.classes = list(classes)
        self._index = {c.raw_id: i for i, c in enumerate(self.classes)}

    @classmethod
    def from_raw_ids(cls, raw_ids: list[str]) -> "LabelSpace":
        return cls([ActionClass.from_raw(r) for r in raw_ids])

    @classmethod
    def from_file(cls, path: str | Path) -> "LabelSpace":
        """Read raw class ids from a text file, one per line, in index order."""
        raw_ids = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                raw_ids.append(line)
        return cls.from_raw_ids(raw_ids)

    def index_of(self, raw_id: str) -> int:
        return self._index[raw_id]

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def __getitem__(self, i: int) -> ActionClass:
        return self.classes[i]
