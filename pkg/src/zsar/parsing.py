"""Parsers turning raw LLM response text into structured descriptor fields.

All parsers are pure and deterministic: the same response text always
yields the same result or the same error. They tolerate the common ways
real model output drifts from the requested format: markdown code fences,
single vs. double quotes, a leading "Answer:"-style prefix, and trailing
prose after the literal. The first well-formed literal wins.
"""

from __future__ import annotations

import ast
import re

from .errors import ParseError

_FENCE = re.compile(r"```(?:[a-zA-Z0-9_+-]*\n)?(.*?)```", re.DOTALL)
_PREFIX = re.compile(
    r"^\s*(?:answer|description|response|output|result|steps|context)\s*:\s*",
    re.IGNORECASE,
)


def strip_fences(text: str) -> str:
    """Return the content of the first markdown code fence, or the text unchanged."""
    m = _FENCE.search(text)
    if m:
        return m.group(1).strip()
    return text.strip()


def strip_prefix(text: str) -> str:
    """Drop a leading label like "Answer:" or "Description:"."""
    return _PREFIX.sub("", text, count=1)


def _balanced_spans(text: str, open_ch: str, close_ch: str):
    """Yield candidate substrings from each `open_ch` to its matching `close_ch`.

    Quote-aware so brackets inside string literals do not end a span.
    """
    i = 0
    n = len(text)
    while i < n:
        if text[i] != open_ch:
            i += 1
            continue
        depth = 0
        quote = None
        j = i
        while j < n:
            ch = text[j]
            if quote is not None:
                if ch == "\\":
                    j += 2
                    continue
                if ch == quote:
                    quote = None
            elif ch in ("'", '"'):
                quote = ch
            elif ch == open_ch:
                depth += 1
            elif ch == close_ch:
                depth -= 1
                if depth == 0:
                    yield text[i : j + 1]
                    break
            j += 1
        i += 1


def _first_literal(text: str, open_ch: str, close_ch: str):
    for span in _balanced_spans(text, open_ch, close_ch):
        try:
            return ast.literal_eval(span)
        except (ValueError, SyntaxError):
            continue
    return None


def _clean(text: str) -> str:
    return strip_prefix(strip_fences(text))


def parse_decomposition(text: str) -> list[str]:
    """Parse a response into exactly 3 step strings.

    Any parseable list with a different length is rejected rather than
    truncated or padded.
    """
    cleaned = _clean(text)
    value = _first_literal(cleaned, "[", "]")
    if value is None or not isinstance(value, list):
        raise ParseError("no list literal found in response", raw=text)
    if not all(isinstance(s, str) for s in value):
        raise ParseError("list contains non-string items", raw=text)
    steps = [s.strip() for s in value]
    if len(steps) != 3:
        raise ParseError(f"expected exactly 3 steps, got {len(steps)}", raw=text)
    if any(not s for s in steps):
        raise ParseError("empty step string", raw=text)
    return steps


def parse_description(text: str) -> str:
    """Parse a response into a single description string.

    Strips fences, a leading label prefix, and one layer of matching
    surrounding quotes.
    """
    cleaned = _clean(text).strip()
    if len(cleaned) >= 2 and cleaned[0] == cleaned[-1] and cleaned[0] in "'\"":
        inner = cleaned[1:-1]
        # Only unwrap if the quote does not reappear unescaped mid-string
        # with structural meaning; a plain apostrophe is fine.
        cleaned = inner.strip()
    cleaned = cleaned.strip()
    if not cleaned:
        raise ParseError("empty description", raw=text)
    return cleaned


def parse_context(text: str) -> tuple[str, list[str]]:
    """Parse a response into (context string, object list).

    Accepts a dict literal with 'context' and 'objects' keys, with or
    without surrounding braces (the query's own exemplar omits them).
    """
    cleaned = _clean(text)
    value = _first_literal(cleaned, "{", "}")
    if value is None:
        # Brace-less "'context': ..., 'objects': [...]" shape.
        try:
            value = ast.literal_eval("{" + cleaned.strip().rstrip(".") + "}")
        except (ValueError, SyntaxError):
            value = None
    if value is None or not isinstance(value, dict):
        raise ParseError("no dictionary with context/objects found", raw=text)
    if "context" not in value or "objects" not in value:
        raise ParseError("dictionary missing 'context' or 'objects' key", raw=text)
    context = value["context"]
    objects = value["objects"]
    if not isinstance(context, str) or not context.strip():
        raise ParseError("context value is not a non-empty string", raw=text)
    if (
        not isinstance(objects, list)
        or not objects
        or not all(isinstance(o, str) and o.strip() for o in objects)
    ):
        raise ParseError("objects value is not a non-empty list of strings", raw=text)
    return context.strip(), [o.strip() for o in objects]
