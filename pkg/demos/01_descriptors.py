"""Descriptor generation walkthrough.

Shows the three per-class queries, response parsing (including sloppy
model output), the retry rule, and the on-disk cache. Uses a scripted
in-memory transport, so it runs offline; swap in HttpChatTransport with a
real endpoint and API key for live generation.
"""

import json
import tempfile
from pathlib import Path

from zsar.descriptors import (
    CONTEXT_QUERY,
    DECOMPOSITION_QUERY,
    DESCRIPTION_QUERY,
    DescriptorCache,
    generate_all,
)
from zsar.errors import ParseError
from zsar.labels import LabelSpace
from zsar.llm import LlmConfig
from zsar.parsing import parse_context, parse_decomposition


class ScriptedTransport:
    """Canned answers per query kind; note the drift the parser tolerates."""

    answers = {
        DECOMPOSITION_QUERY: "```python\n['approach the slope', 'push off the edge', "
        "'carve turns downhill']\n```",
        DESCRIPTION_QUERY: 'Description: "A person gliding downhill on a board."',
        CONTEXT_QUERY: "{'context': 'snowy mountainside', "
        "'objects': ['board', 'goggles']} Hope that helps!",
    }

    def __init__(self):
        self.calls = 0

    def complete(self, system, user):
        self.calls += 1
        return self.answers[system]


print("== the three queries sent per class ==")
for name, query in [
    ("decomposition", DECOMPOSITION_QUERY),
    ("description", DESCRIPTION_QUERY),
    ("context", CONTEXT_QUERY),
]:
    print(f"[{name}] {query[:88]}...")

print("\n== parsing tolerates real-world response drift ==")
print(parse_decomposition("Answer: ['a', 'b', 'c'] as requested"))
print(parse_context("'context': 'a person', 'objects': ['person']"))
try:
    parse_decomposition("['only', 'two']")
except ParseError as exc:
    print(f"rejected non-3-step list: {exc}")

print("\n== generate and cache a label space ==")
with tempfile.TemporaryDirectory() as tmp:
    cache_path = Path(tmp) / "descriptors.json"
    labels = LabelSpace.from_raw_ids(["Snowboarding", "ApplyEyeMakeup", "Playing_Daf"])
    cfg = LlmConfig(model_id="scripted-demo")

    transport = ScriptedTransport()
    result = generate_all(labels, cfg, DescriptorCache(cache_path), transport)
    print(f"cold run: {transport.calls} LLM calls for {len(result.sets)} classes")

    transport = ScriptedTransport()
    generate_all(labels, cfg, DescriptorCache(cache_path), transport)
    print(f"warm run: {transport.calls} LLM calls (cache answered everything)")

    entry = json.loads(cache_path.read_text())["snowboarding"]
    print("cached entry:", json.dumps(entry, indent=2)[:320], "...")
