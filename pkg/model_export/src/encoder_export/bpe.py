"""Byte-level BPE tokenizer matching the published text-encoder vocabulary scheme.

Independent of the inference package's tokenizer on purpose: golden
fixtures computed here and decoded there cross-check both implementations
of the same published algorithm.
"""

from __future__ import annotations

import gzip
import html
from pathlib import Path

import regex
import torch

MAX_MERGES = 49152 - 256 - 2

PATTERN = regex.compile(
    r"""<\|startoftext\|>|<\|endoftext\|>|'s|'t|'re|'ve|'m|'ll|'d|[\p{L}]+|[\p{N}]|[^\s\p{L}\p{N}]+""",
    regex.IGNORECASE,
)


def byte_alphabet() -> dict[int, str]:
    visible = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    table = {}
    fill = 0
    for b in range(256):
        if b in visible:
            table[b] = chr(b)
        else:
            table[b] = chr(256 + fill)
            fill += 1
    # preserve the published ordering: visible bytes first
    ordered = {b: chr(b) for b in visible}
    fill = 0
    for b in range(256):
        if b not in ordered:
            ordered[b] = chr(256 + fill)
            fill += 1
    return ordered


class Tokenizer:
    def __init__(self, merges_path: str | Path, context_length: int = 77):
        self.context_length = context_length
        path = Path(merges_path)
        opener = gzip.open if path.suffix == ".gz" else open
        with opener(path, "rt", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
        if lines and (not lines[0] or lines[0].startswith("#")):
            lines = lines[1:]
        merges = [tuple(l.split()) for l in lines[:MAX_MERGES] if len(l.split()) == 2]

        self.byte_table = byte_alphabet()
        symbols = list(self.byte_table.values())
        vocab = symbols + [s + "</w>" for s in symbols]
        vocab += ["".join(m) for m in merges]
        vocab += ["<|startoftext|>", "<|endoftext|>"]
        self.ranks = {m: r for r, m in enumerate(merges)}
        self.ids = {tok: i for i, tok in enumerate(vocab)}
        self.sot = self.ids["<|startoftext|>"]
        self.eot = self.ids["<|endoftext|>"]

    @property
    def vocab_size(self) -> int:
        return len(self.ids)

    def _merge_word(self, symbols: list[str]) -> list[str]:
        while len(symbols) > 1:
            pairs = [(symbols[i], symbols[i + 1]) for i in range(len(symbols) - 1)]
            ranked = [(self.ranks[p], i) for i, p in enumerate(pairs) if p in self.ranks]
            if not ranked:
                break
            best_rank, _ = min(ranked)
            best_pair = None
            for i, p in enumerate(pairs):
                if self.ranks.get(p) == best_rank:
                    best_pair = p
                    break
            merged = []
            i = 0
            while i < len(symbols):
                if (
                    i < len(symbols) - 1
                    and (symbols[i], symbols[i + 1]) == best_pair
                ):
                    merged.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        return symbols

    def encode(self, text: str) -> list[int]:
        text = html.unescape(html.unescape(text))
        text = " ".join(text.split()).strip().lower()
        out: list[int] = []
        for word in PATTERN.findall(text):
            mapped = [self.byte_table[b] for b in word.encode("utf-8")]
            mapped = mapped[:-1] + [mapped[-1] + "</w>"] if mapped else mapped
            out.extend(self.ids[s] for s in self._merge_word(mapped))
        return out

    def batch(self, texts: list[str]) -> torch.Tensor:
        out = torch.zeros(len(texts), self.context_length, dtype=torch.long)
        for row, text in enumerate(texts):
            ids = [self.sot] + self.encode(text) + [self.eot]
            if len(ids) > self.context_length:
                ids = ids[: self.context_length]
                ids[-1] = self.eot
            out[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        return out
