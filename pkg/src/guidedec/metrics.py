"""Quality measures over generated runs: perplexity, repetition, success rate."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

from .decoder import GenerationResult
from .models import sequence_log_prob
from .tokenization import words_of
from .types import Storyline, WordNormalizer, default_normalizer, normalize_word

__all__ = [
    "PhraseOutcome",
    "RunMeasures",
    "MeasureStats",
    "perplexity",
    "repetition",
    "success_rate",
    "measure_run",
    "aggregate",
]


@dataclass(frozen=True)
class PhraseOutcome:
    phrase: str
    occurred: bool
    step: int | None


@dataclass(frozen=True)
class RunMeasures:
    ppl: float
    rep: float
    sr: float
    per_phrase: tuple[PhraseOutcome, ...]
    sr_defined: bool = True  # False for an empty storyline (sr reported as 1.0)

    def to_json(self) -> dict:
        return {
            "ppl": self.ppl,
            "rep": self.rep,
            "sr": self.sr,
            "sr_defined": self.sr_defined,
            "per_phrase": [
                {"phrase": p.phrase, "occurred": p.occurred, "step": p.step}
                for p in self.per_phrase
            ],
        }


def perplexity(ids: Sequence[int], scorer) -> float:
    """exp of the mean negative log-probability per token (natural log)."""
    ids = list(ids)
    if not ids:
        raise ValueError("empty sequence")
    return math.exp(-sequence_log_prob(scorer, ids) / len(ids))


def repetition(items: Sequence[Hashable], n: int = 4) -> float:
    """Proportion of repeated n-grams: 1 - unique/total occurrences.

    Sequences shorter than n have no n-grams and score 0.0. Works on token
    ids or on word lists alike.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    items = list(items)
    total = len(items) - n + 1
    if total <= 0:
        return 0.0
    grams = Counter(tuple(items[i : i + n]) for i in range(total))
    return 1.0 - len(grams) / total


def _surfaces(phrases: Storyline | Sequence[str]) -> list[str]:
    if isinstance(phrases, Storyline):
        return [p.surface for p in phrases.phrases]
    return [str(s) for s in phrases]


def success_rate(
    result: GenerationResult,
    phrases: Storyline | Sequence[str],
    normalizer: WordNormalizer = default_normalizer,
) -> tuple[float, list[PhraseOutcome]]:
    """Share of guide phrases that occurred in the generated text.

    A phrase counts as occurred if the decoder logged its insertion, or if
    all of its words appear as a contiguous normalized word run in the
    generated text (the prompt does not count). Accepts a Storyline or the
    bare phrase strings.
    """
    surfaces = _surfaces(phrases)
    inserted = {phrase_index: step for phrase_index, step in result.insertion_log}
    text_words = [normalize_word(w, normalizer) for w in words_of(result.text)]
    outcomes: list[PhraseOutcome] = []
    for i, surface in enumerate(surfaces):
        if i in inserted:
            outcomes.append(PhraseOutcome(surface, True, inserted[i]))
            continue
        target = [normalize_word(w, normalizer) for w in surface.split()]
        hit = any(
            text_words[j : j + len(target)] == target
            for j in range(len(text_words) - len(target) + 1)
        )
        outcomes.append(PhraseOutcome(surface, hit, None))
    if not surfaces:
        return 1.0, outcomes
    return sum(o.occurred for o in outcomes) / len(surfaces), outcomes


def measure_run(
    result: GenerationResult,
    phrases: Storyline | Sequence[str],
    scorer,
    ngram: int = 4,
    word_level_rep: bool = False,
    normalizer: WordNormalizer = default_normalizer,
) -> RunMeasures:
    """All three measures for one generated run.

    Perplexity and repetition are computed over generated tokens only,
    mirroring the token-budget convention.
    """
    ppl = perplexity(result.generated_ids, scorer)
    rep_items: Sequence = words_of(result.text) if word_level_rep else result.generated_ids
    rep = repetition(rep_items, n=ngram)
    sr, per_phrase = success_rate(result, phrases, normalizer)
    return RunMeasures(
        ppl=ppl,
        rep=rep,
        sr=sr,
        per_phrase=tuple(per_phrase),
        sr_defined=bool(_surfaces(phrases)),
    )


@dataclass(frozen=True)
class MeasureStats:
    mean: float
    std: float  # population standard deviation
    n: int

    def __str__(self) -> str:
        return f"{self.mean:.2f} ± {self.std:.2f}"


def aggregate(runs: Sequence[RunMeasures]) -> dict[str, MeasureStats]:
    """Mean and population std per measure, for Table-style reports."""
    if not runs:
        raise ValueError("no runs to aggregate")
    out: dict[str, MeasureStats] = {}
    for name in ("ppl", "rep", "sr"):
        values = [getattr(r, name) for r in runs]
        mean = sum(values) / len(values)
        variance = sum((v - mean) ** 2 for v in values) / len(values)
        out[name] = MeasureStats(mean=mean, std=math.sqrt(variance), n=len(values))
    return out
