"""Byte-pair-encoding tokenizer for contrastive text encoders.

Implements the byte-level BPE scheme used by the public CLIP vocabulary:
every token ends a word with a "</w>" marker, merges are applied by rank,
and sequences are padded to a fixed context window between start- and
end-of-text markers. The merge table is loaded from a data file (plain text
or gzip, one merge pair per line, optional "#..." header line); pass the
published vocabulary file to reproduce the original model's token ids.
"""

from __future__ import annotations

import gzip
import html
import logging
from functools import lru_cache
from pathlib import Path

import numpy as np
import regex

from .errors import TokenizationError

log = logging.getLogger(__name__)

CONTEXT_LENGTH = 77
# Published cap: full vocab 49152 minus 256 byte symbols minus 2 specials.
_MAX_MERGES = 49152 - 256 - 2

_TOKEN_PATTERN = regex.compile(
    r"""<\|startoftext\|>|<\|endoftext\|>|'s|'t|'re|'ve|'m|'ll|'d|[\p{L}]+|[\p{N}]|[^\s\p{L}\p{N}]+""",
    regex.IGNORECASE,
)


@lru_cache()
def bytes_to_unicode() -> dict[int, str]:
    """Map every byte to a printable unicode character, reversibly."""
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(2**8):
        if b not in bs:
            bs.append(b)
            cs.append(2**8 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


def _get_pairs(word: tuple[str, ...]) -> set[tuple[str, str]]:
    return {(word[i], word[i + 1]) for i in range(len(word) - 1)}


def _clean(text: str) -> str:
    text = html.unescape(html.unescape(text))
    return " ".join(text.split()).strip()


def load_merges(path: str | Path) -> list[tuple[str, str]]:
    """Load BPE merge pairs from a text or gzip file."""
    path = Path(path)
    if path.suffix == ".gz":
        raw = gzip.open(path, "rt", encoding="utf-8").read()
    else:
        raw = path.read_text(encoding="utf-8")
    lines = raw.split("\n")
    if lines and (lines[0].startswith("#") or lines[0] == ""):
        lines = lines[1:]
    merges: list[tuple[str, str]] = []
    for line in lines[:_MAX_MERGES]:
        parts = line.split()
        if len(parts) == 2:
            merges.append((parts[0], parts[1]))
    return merges


class BpeTokenizer:
    """Byte-level BPE tokenizer with a fixed context window."""

    def __init__(self, merges_path: str | Path, context_length: int = CONTEXT_LENGTH):
        self.context_length = context_length
        self.byte_encoder = bytes_to_unicode()
        self.byte_decoder = {v: k for k, v in self.byte_encoder.items()}
        merges = load_merges(merges_path)
        vocab = list(self.byte_encoder.values())
        vocab = vocab + [v + "</w>" for v in vocab]
        for merge in merges:
            vocab.append("".join(merge))
        vocab.extend(["<|startoftext|>", "<|endoftext|>"])
        self.encoder = {tok: i for i, tok in enumerate(vocab)}
        self.decoder = {i: tok for tok, i in self.encoder.items()}
        self.bpe_ranks = {pair: i for i, pair in enumerate(merges)}
        self.sot_token = self.encoder["<|startoftext|>"]
        self.eot_token = self.encoder["<|endoftext|>"]
        self._bpe_cache: dict[str, str] = {}

    @property
    def vocab_size(self) -> int:
        return len(self.encoder)

    def _bpe(self, token: str) -> str:
        cached = self._bpe_cache.get(token)
        if cached is not None:
            return cached
        word = tuple(token[:-1]) + (token[-1] + "</w>",)
        pairs = _get_pairs(word)
        if not pairs:
            return token + "</w>"
        while True:
            bigram = min(pairs, key=lambda p: self.bpe_ranks.get(p, float("inf")))
            if bigram not in self.bpe_ranks:
                break
            first, second = bigram
            new_word: list[str] = []
            i = 0
            while i < len(word):
                try:
                    j = word.index(first, i)
                except ValueError:
                    new_word.extend(word[i:])
                    break
                new_word.extend(word[i:j])
                i = j
                if i < len(word) - 1 and word[i] == first and word[i + 1] == second:
                    new_word.append(first + second)
                    i += 2
                else:
                    new_word.append(word[i])
                    i += 1
            word = tuple(new_word)
            if len(word) == 1:
                break
            pairs = _get_pairs(word)
        result = " ".join(word)
        self._bpe_cache[token] = result
        return result

    def encode(self, text: str) -> list[int]:
        """Encode one text into token ids (no specials, no padding)."""
        ids: list[int] = []
        cleaned = _clean(text).lower()
        for token in _TOKEN_PATTERN.findall(cleaned):
            token = "".join(self.byte_encoder[b] for b in token.encode("utf-8"))
            ids.extend(self.encoder[t] for t in self._bpe(token).split(" "))
        return ids

    def decode(self, ids: list[int]) -> str:
        text = "".join(self.decoder[i] for i in ids)
        raw = bytearray(self.byte_decoder[c] for c in text if c in self.byte_decoder)
        return raw.decode("utf-8", errors="replace").replace("</w>", " ").strip()

    def tokenize(self, texts: list[str]) -> np.ndarray:
        """Encode a batch to an int64 array of shape (len(texts), context window).

        Texts longer than the window are truncated (the end-of-text marker is
        kept) with a logged warning; a text that yields no tokens at all is an
        error.
        """
        out = np.zeros((len(texts), self.context_length), dtype=np.int64)
        for row, text in enumerate(texts):
            ids = self.encode(text)
            if not ids:
                raise TokenizationError(f"text produced no tokens: {text!r}")
            ids = [self.sot_token] + ids + [self.eot_token]
            if len(ids) > self.context_length:
                log.warning(
                    "text truncated from %d to %d tokens: %.60r",
                    len(ids), self.context_length, text,
                )
                ids = ids[: self.context_length]
                ids[-1] = self.eot_token
            out[row, : len(ids)] = ids
        return out
