"""Shared value types: vocabularies, guide phrases, decoding configuration, state.

Score vectors are plain float64 numpy arrays indexed by token id; helpers in
`decoder` validate their length and finiteness. Everything here is an
immutable value except :class:`GenerationState`, which is owned by exactly
one generation session.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Sequence

__all__ = [
    "WordNormalizer",
    "default_normalizer",
    "normalize_word",
    "Strategy",
    "Vocabulary",
    "GuidePhrase",
    "Storyline",
    "DecodingConfig",
    "GenerationState",
]

# A word normalizer maps a word to the canonical form used for occurrence
# matching. The default is case-folding; a lemmatizer can be plugged in.
WordNormalizer = Callable[[str], str]


def default_normalizer(word: str) -> str:
    return word.strip().casefold()


def normalize_word(word: str, normalizer: WordNormalizer = default_normalizer) -> str:
    """Canonical form of ``word`` used when matching phrase occurrences."""
    if not word:
        raise ValueError("empty word")
    return normalizer(word)


class Strategy(str, Enum):
    """Decoding strategy: plain sampling, score fusion, or fusion plus boost."""

    AR_ONLY = "ar"
    FUSION = "fusion"
    FUSION_BOOST = "boost"


class Vocabulary:
    """Ordered token strings; the position of a string is its token id."""

    __slots__ = ("tokens", "_index")

    def __init__(self, tokens: Iterable[str]):
        self.tokens: tuple[str, ...] = tuple(tokens)
        self._index: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if tok in self._index:
                raise ValueError(f"non-unique vocabulary: {tok!r}")
            self._index[tok] = i

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def id_of(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise ValueError(f"unknown token {token!r}") from None

    def get(self, token: str) -> int | None:
        return self._index.get(token)

    def token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise ValueError(f"unknown token id {token_id}")
        return self.tokens[token_id]


@dataclass(frozen=True)
class GuidePhrase:
    """A guide expression (single word or multi-word) prepared for the decoder.

    ``token_ids`` is the AR-side tokenization of ``surface``;
    ``first_token_id`` is the token whose probability gets boosted;
    ``normalized_first_word`` is what sampled words are compared against.
    """

    surface: str
    token_ids: tuple[int, ...]
    first_token_id: int
    normalized_first_word: str

    def __post_init__(self) -> None:
        if not self.token_ids:
            raise ValueError(f"phrase {self.surface!r} tokenizes to nothing")
        if self.first_token_id != self.token_ids[0]:
            raise ValueError("first_token_id must equal token_ids[0]")

    @property
    def words(self) -> list[str]:
        return self.surface.split()

    @classmethod
    def from_surface(
        cls,
        surface: str,
        tokenizer,
        normalizer: WordNormalizer = default_normalizer,
    ) -> "GuidePhrase":
        surface = surface.strip()
        if not surface:
            raise ValueError("empty phrase")
        ids = tuple(tokenizer.encode(surface))
        if not ids:
            raise ValueError(f"phrase {surface!r} tokenizes to nothing")
        return cls(
            surface=surface,
            token_ids=ids,
            first_token_id=ids[0],
            normalized_first_word=normalize_word(surface.split()[0], normalizer),
        )


@dataclass(frozen=True)
class Storyline:
    """Ordered guide phrases, consumed strictly left to right."""

    phrases: tuple[GuidePhrase, ...] = ()

    def __len__(self) -> int:
        return len(self.phrases)

    def __getitem__(self, i: int) -> GuidePhrase:
        return self.phrases[i]

    @classmethod
    def from_strings(
        cls,
        surfaces: Sequence[str],
        tokenizer,
        normalizer: WordNormalizer = default_normalizer,
    ) -> "Storyline":
        return cls(tuple(GuidePhrase.from_surface(s, tokenizer, normalizer) for s in surfaces))


@dataclass(frozen=True)
class DecodingConfig:
    """Knobs for one generation session.

    ``k`` is clamped to the vocabulary size at use. ``unshared_fill`` is the
    masked-model contribution assigned to AR tokens outside the shared
    vocabulary (0.0 leaves their AR-only score intact; negative values
    down-weight them).
    """

    strategy: Strategy = Strategy.FUSION_BOOST
    k: int = 10
    lambda0: float = 0.3
    max_new_tokens: int = 90
    seed: int = 0
    temperature: float = 1.0
    unshared_fill: float = 0.0
    renormalize_shared: bool = False
    trace: bool = False

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be >= 0")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def with_(self, **kwargs) -> "DecodingConfig":
        return replace(self, **kwargs)


@dataclass
class GenerationState:
    """Mutable per-session record of what has been generated so far.

    ``step`` equals ``len(generated_ids)`` between steps; the step being
    generated next is ``step + 1``. ``last_insertion_step`` is 0 before any
    phrase has been inserted.
    """

    prompt_ids: tuple[int, ...]
    generated_ids: list[int] = field(default_factory=list)
    phrase_index: int = 0
    last_insertion_step: int = 0
    insertion_log: list[tuple[int, int]] = field(default_factory=list)

    @property
    def step(self) -> int:
        return len(self.generated_ids)

    @property
    def context_ids(self) -> tuple[int, ...]:
        return tuple(self.prompt_ids) + tuple(self.generated_ids)

    def clone(self) -> "GenerationState":
        return GenerationState(
            prompt_ids=tuple(self.prompt_ids),
            generated_ids=list(self.generated_ids),
            phrase_index=self.phrase_index,
            last_insertion_step=self.last_insertion_step,
            insertion_log=list(self.insertion_log),
        )
