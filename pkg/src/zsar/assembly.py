"""Turn a descriptor set into the final per-class list of prompt texts.

Selection happens in three orthogonal steps: pick descriptor kinds, prepend
the class phrase to every non-class text, and optionally wrap every text in
every sentence template. All steps are pure, so a (descriptor set, config)
pair always produces the same batch in the same order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .descriptors import DescriptorSet
from .labels import ActionClass

PLACEHOLDER = "{}"


class DescriptorKind(str, Enum):
    CLASS = "class"
    DECOMPOSITION = "decomposition"
    DESCRIPTION = "description"
    CONTEXT = "context"
    COMBINATION = "combination"


KIND_ORDER = (
    DescriptorKind.CLASS,
    DescriptorKind.DECOMPOSITION,
    DescriptorKind.DESCRIPTION,
    DescriptorKind.CONTEXT,
    DescriptorKind.COMBINATION,
)


def load_templates(path: str | Path) -> list[str]:
    """Read templates from a text file: one per line, '#' comments ignored."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return _parse_template_lines(lines)


def default_templates() -> list[str]:
    """The packaged 28-sentence template set for video action prompts."""
    text = resources.files("zsar").joinpath("templates/action28.txt").read_text("utf-8")
    return _parse_template_lines(text.splitlines())


def _parse_template_lines(lines: list[str]) -> list[str]:
    templates = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.count(PLACEHOLDER) != 1:
            raise ValueError(f"template must contain exactly one '{{}}': {line!r}")
        templates.append(line)
    return templates


@dataclass
class DescriptorConfig:
    """Which descriptor kinds to use and how to dress them up."""

    kinds: tuple[DescriptorKind, ...] = (DescriptorKind.COMBINATION,)
    prepend_class: bool = True
    use_templates: bool = True
    templates: tuple[str, ...] = ()

    def __post_init__(self):
        self.kinds = tuple(DescriptorKind(k) for k in self.kinds)
        if not self.kinds:
            raise ValueError("at least one descriptor kind is required")
        if self.use_templates:
            if not self.templates:
                self.templates = tuple(default_templates())
            for t in self.templates:
                if t.count(PLACEHOLDER) != 1:
                    raise ValueError(f"template must contain exactly one '{{}}': {t!r}")


@dataclass
class PromptBatch:
    """The final ordered texts for one class; length varies per class."""

    action: ActionClass
    texts: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.texts)


def base_texts(ds: DescriptorSet, kinds) -> list[str]:
    """Expand the selected kinds into raw descriptor strings.

    Contribution order is fixed: class label, then the 3 decomposition
    steps, then the description, then context followed by each object.
    The combination is the concatenation of all four in that order.
    """
    kinds = tuple(DescriptorKind(k) for k in kinds)
    display = ds.action.display
    parts = {
        DescriptorKind.CLASS: [display],
        DescriptorKind.DECOMPOSITION: list(ds.decomposition),
        DescriptorKind.DESCRIPTION: [ds.description],
        DescriptorKind.CONTEXT: [ds.context, *ds.objects],
    }
    parts[DescriptorKind.COMBINATION] = (
        parts[DescriptorKind.CLASS]
        + parts[DescriptorKind.DECOMPOSITION]
        + parts[DescriptorKind.DESCRIPTION]
        + parts[DescriptorKind.CONTEXT]
    )
    out: list[str] = []
    for kind in KIND_ORDER:
        if kind in kinds:
            out.extend(parts[kind])
    return out


def assemble(ds: DescriptorSet, cfg: DescriptorConfig) -> PromptBatch:
    """Build the final prompt batch for one class.

    Batch size is exactly |base texts| x (|templates| if templates are on,
    else 1). The class phrase is never prepended to itself.
    """
    display = ds.action.display
    texts: list[str] = []
    for t in base_texts(ds, cfg.kinds):
        if cfg.prepend_class and t != display:
            t = f"{display}. {t}"
        if cfg.use_templates:
            texts.extend(tpl.replace(PLACEHOLDER, t, 1) for tpl in cfg.templates)
        else:
            texts.append(t)
    return PromptBatch(action=ds.action, texts=texts)
