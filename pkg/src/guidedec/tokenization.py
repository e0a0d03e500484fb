"""Tokenizers the engine understands.

Two concrete tokenizers cover the two backend families:

* :class:`WordTokenizer` for toy table models, where every token string is a
  whole word and decoding joins with single spaces;
* :class:`ByteLevelBPETokenizer` for remote backends, reconstructed
  engine-side from the served vocabulary and merges so segmentation stays
  byte-exact with the serving model.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Protocol, Sequence, runtime_checkable

import regex as _regex

from .types import Vocabulary

__all__ = [
    "Tokenizer",
    "WordTokenizer",
    "ByteLevelBPETokenizer",
    "encode_tolerant",
    "complete_words",
    "words_of",
]

# GPT-2 style pre-tokenization: contractions, letter runs, digit runs,
# punctuation runs, then whitespace.
_PRETOKEN_PATTERN = _regex.compile(
    r"""'(?:[sdmt]|ll|ve|re)| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""
)

_WORD_PATTERN = _regex.compile(r"[\w-]+", _regex.UNICODE)


@runtime_checkable
class Tokenizer(Protocol):
    """Minimal text <-> token-id contract.

    ``word_per_token`` is True when every token is a complete word, in which
    case the decoder treats each sampled token as a just-completed word.
    """

    word_per_token: bool

    def encode(self, text: str) -> list[int]: ...

    def decode(self, ids: Sequence[int]) -> str: ...


class WordTokenizer:
    """Whitespace word tokenizer over a fixed vocabulary (toy backends)."""

    word_per_token = True

    def __init__(self, vocabulary: Vocabulary):
        self.vocabulary = vocabulary

    def encode(self, text: str) -> list[int]:
        return [self.vocabulary.id_of(w) for w in text.split()]

    def encode_known(self, text: str) -> list[int]:
        """Like encode, but silently drops words absent from the vocabulary."""
        ids = []
        for w in text.split():
            tid = self.vocabulary.get(w)
            if tid is not None:
                ids.append(tid)
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(self.vocabulary.token(i) for i in ids)


@lru_cache(maxsize=1)
def _byte_unicode_table() -> dict[int, str]:
    # The printable-byte remapping used by byte-level BPE vocabularies:
    # printable bytes map to themselves, the rest to U+0100 and up.
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(0xA1, 0xAD)) + list(range(0xAE, 0x100))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


class ByteLevelBPETokenizer:
    """Byte-level BPE encoder/decoder built from a vocabulary and merge list.

    ``merges`` is the ranked list of merge rules, each "left right" with the
    two sides written in the remapped byte alphabet (the format served by
    the model server and used by BBPE tokenizer files).
    """

    word_per_token = False

    def __init__(self, vocabulary: Vocabulary, merges: Sequence[str]):
        self.vocabulary = vocabulary
        self._ranks: dict[tuple[str, str], int] = {}
        for rank, line in enumerate(merges):
            left, _, right = line.partition(" ")
            if not left or not right:
                raise ValueError(f"malformed merge rule {line!r}")
            self._ranks[(left, right)] = rank
        table = _byte_unicode_table()
        self._byte_to_char = table
        self._char_to_byte = {c: b for b, c in table.items()}
        self._cache: dict[str, tuple[str, ...]] = {}

    def _bpe(self, piece: str) -> tuple[str, ...]:
        cached = self._cache.get(piece)
        if cached is not None:
            return cached
        parts = list(piece)
        while len(parts) > 1:
            pairs = {(parts[i], parts[i + 1]) for i in range(len(parts) - 1)}
            best = min(pairs, key=lambda p: self._ranks.get(p, float("inf")))
            if best not in self._ranks:
                break
            merged: list[str] = []
            i = 0
            while i < len(parts):
                if i < len(parts) - 1 and (parts[i], parts[i + 1]) == best:
                    merged.append(parts[i] + parts[i + 1])
                    i += 2
                else:
                    merged.append(parts[i])
                    i += 1
            parts = merged
        result = tuple(parts)
        self._cache[piece] = result
        return result

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for match in _PRETOKEN_PATTERN.finditer(text):
            piece = "".join(self._byte_to_char[b] for b in match.group(0).encode("utf-8"))
            for token in self._bpe(piece):
                ids.append(self.vocabulary.id_of(token))
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        chars = "".join(self.vocabulary.token(i) for i in ids)
        data = bytes(self._char_to_byte[c] for c in chars)
        return data.decode("utf-8", errors="replace")


def encode_tolerant(tokenizer: Tokenizer, text: str) -> list[int]:
    """Encode text for use as model context, dropping out-of-vocabulary words
    when the tokenizer supports it (word-level toys); BBPE never needs this."""
    encode_known = getattr(tokenizer, "encode_known", None)
    if encode_known is not None:
        return encode_known(text)
    return tokenizer.encode(text)


def words_of(text: str) -> list[str]:
    return _WORD_PATTERN.findall(text)


def complete_words(text: str) -> list[str]:
    """Words of ``text`` that are closed by a following boundary character.

    A trailing word run is treated as still in progress (the next token may
    extend it), so it is excluded unless the text ends with a boundary.
    """
    words = _WORD_PATTERN.findall(text)
    if not words:
        return []
    last = _WORD_PATTERN.search(text[::-1])
    # Trailing run reaches the end of the string <=> it may still grow.
    if last is not None and last.start() == 0:
        return words[:-1]
    return words
