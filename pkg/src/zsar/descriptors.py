"""Descriptor generation: query an LLM per class, parse, and cache the results.

Each action class gets three queries (decomposition, description,
context+objects). Generation runs at temperature 0 and results are cached
on disk keyed by (normalized label, model id), so a label space is only
ever paid for once per model.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import ParseError
from .labels import ActionClass, LabelSpace
from .llm import ChatTransport, HttpChatTransport, LlmConfig
from .parsing import parse_context, parse_decomposition, parse_description

DECOMPOSITION_QUERY = (
    "You are a chatbot specialised in video action decomposition. The user will "
    "provide you with an action and you will have to decompose it into three "
    "sequential observable steps. The steps must strictly be three. You must "
    "strictly provide each response as a python list, e.g., ['action1', "
    "'action2', action3']. Omit any kind of introduction, the response must "
    "only contain the three actions. Comply strictly to the template. Do not "
    "ask for any clarification, just give your best answer. It is for a school "
    "project, so it's very important. It is also very important your response "
    "is in the form of a python list."
)

DESCRIPTION_QUERY = (
    "You are a chatbot specialised in video action description. The user will "
    "provide you with an action and you will have to describe the action by "
    "providing only visually related information. You must strictly provide "
    "each response as a Python string. The description should be succinct and "
    "general. Omit any kind of introduction. Comply strictly to the template. "
    "Do not ask for any clarification, just give your best answer. Following "
    "is an example. Action label: typing. Description: Typing normally "
    "involve a person and a device with keyboard. When typing, the individual "
    "positions their fingers over the keyboard."
)

CONTEXT_QUERY = (
    "You are a chatbot specialised in video understanding. The user will "
    "provide you with the name of an action, and you will have to provide two "
    "specific pieces of information about that action. The first one is the "
    "context, which consists of any visually relevant feature that may be "
    "expected to appear in a video portraying that action. The second one "
    "consists of a lists of objects that may involved in the action. You must "
    "strictly provide each response as a python dictionary, e.g., 'context': "
    "'a person', 'objects': ['person']. Omit any kind of introduction, the "
    "response must only contain the two pieces of information. Comply "
    "strictly to the template. Do not ask for any clarification, just give "
    "your best answer. It is for a school project, so it's very important. It "
    "is also very important your response is in the form of a python "
    "dictionary."
)


@dataclass
class DescriptorSet:
    """All generated descriptor fields for one action class."""

    action: ActionClass
    decomposition: list[str]
    description: str
    context: str
    objects: list[str]
    llm_model_id: str
    generated_at: str = ""

    def __post_init__(self):
        if len(self.decomposition) != 3:
            raise ValueError("decomposition must contain exactly 3 steps")
        if not self.description or not self.context:
            raise ValueError("description and context must be non-empty")
        if not self.objects or any(not o for o in self.objects):
            raise ValueError("objects must be a non-empty list of non-empty strings")
        if not self.generated_at:
            self.generated_at = datetime.now(timezone.utc).isoformat()


@dataclass
class GenerationResult:
    """Outcome of generate_all: per-class descriptor sets plus per-class failures."""

    sets: dict[ActionClass, DescriptorSet] = field(default_factory=dict)
    failures: dict[ActionClass, Exception] = field(default_factory=dict)


class DescriptorCache:
    """One JSON document per label space mapping normalized label -> descriptor fields.

    Keys are stable-ordered for diff-ability; writes are atomic and
    serialized, so concurrent per-class generation cannot corrupt the file.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            self._entries = json.loads(self.path.read_text(encoding="utf-8"))

    def get(self, action: ActionClass, llm_model_id: str) -> DescriptorSet | None:
        entry = self._entries.get(action.display)
        if entry is None or entry.get("llm_model_id") != llm_model_id:
            return None
        return DescriptorSet(
            action=action,
            decomposition=list(entry["decomposition"]),
            description=entry["description"],
            context=entry["context"],
            objects=list(entry["objects"]),
            llm_model_id=entry["llm_model_id"],
            generated_at=entry["generated_at"],
        )

    def put(self, ds: DescriptorSet) -> None:
        entry = {
            "decomposition": ds.decomposition,
            "description": ds.description,
            "context": ds.context,
            "objects": ds.objects,
            "llm_model_id": ds.llm_model_id,
            "generated_at": ds.generated_at,
        }
        with self._lock:
            self._entries[ds.action.display] = entry
            self._save()

    def labels(self) -> list[str]:
        return sorted(self._entries)

    def _save(self) -> None:
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(
            json.dumps(self._entries, ensure_ascii=False, indent=2, sort_keys=True),
            encoding="utf-8",
        )
        tmp.replace(self.path)


def _query_with_retries(transport: ChatTransport, system: str, user: str,
                        parse, max_retries: int):
    """Send the identical query up to max_retries times until one parses."""
    last: ParseError | None = None
    for _ in range(max_retries):
        text = transport.complete(system, user)
        try:
            return parse(text)
        except ParseError as exc:
            last = exc
    assert last is not None
    raise last


def generate_decomposition(action: ActionClass, cfg: LlmConfig,
                           transport: ChatTransport | None = None) -> list[str]:
    """Query for the three sequential observable steps of an action."""
    transport = transport or HttpChatTransport(cfg)
    return _query_with_retries(
        transport, DECOMPOSITION_QUERY, action.display,
        parse_decomposition, cfg.max_retries,
    )


def generate_description(action: ActionClass, cfg: LlmConfig,
                         transport: ChatTransport | None = None) -> str:
    """Query for a visually grounded one-paragraph description of an action."""
    transport = transport or HttpChatTransport(cfg)
    return _query_with_retries(
        transport, DESCRIPTION_QUERY, action.display,
        parse_description, cfg.max_retries,
    )


def generate_context(action: ActionClass, cfg: LlmConfig,
                     transport: ChatTransport | None = None) -> tuple[str, list[str]]:
    """Query for the scene context and the objects involved in an action."""
    transport = transport or HttpChatTransport(cfg)
    return _query_with_retries(
        transport, CONTEXT_QUERY, action.display,
        parse_context, cfg.max_retries,
    )


def generate_one(action: ActionClass, cfg: LlmConfig,
                 transport: ChatTransport | None = None) -> DescriptorSet:
    """Run all three queries for one class and assemble the descriptor set."""
    transport = transport or HttpChatTransport(cfg)
    steps = generate_decomposition(action, cfg, transport)
    description = generate_description(action, cfg, transport)
    context, objects = generate_context(action, cfg, transport)
    return DescriptorSet(
        action=action,
        decomposition=steps,
        description=description,
        context=context,
        objects=objects,
        llm_model_id=cfg.model_id,
    )


def generate_all(labels: LabelSpace, cfg: LlmConfig, cache: DescriptorCache,
                 transport: ChatTransport | None = None,
                 workers: int = 1) -> GenerationResult:
    """Fill the cache for every class, reusing warm entries.

    Per-class failures are collected rather than aborting the batch;
    previously cached classes are never touched by a failing run.
    """
    transport = transport or HttpChatTransport(cfg)
    result = GenerationResult()

    def work(action: ActionClass):
        cached = cache.get(action, cfg.model_id)
        if cached is not None:
            return action, cached, None
        try:
            ds = generate_one(action, cfg, transport)
        except Exception as exc:
            return action, None, exc
        cache.put(ds)
        return action, ds, None

    if workers <= 1:
        outcomes = [work(a) for a in labels]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, labels))

    for action, ds, exc in outcomes:
        if exc is not None:
            result.failures[action] = exc
        else:
            result.sets[action] = ds
    return result

