"""Brute-force recomputation of the per-step sampling distribution.

This module exists to catch divergence in the engine: it re-derives every
quantity (log scores, fusion, projection, boost arithmetic, top-K softmax)
from the toy tables with naive pure-Python enumeration and sorting, sharing
no score or boost code with `decoder`. Only usable with the table backends
and word-level tokenization.
"""

from __future__ import annotations

import math
from typing import Sequence

from .align import AlignmentMap
from .toy import TableARModel, TableMLMModel
from .types import (
    DecodingConfig,
    GenerationState,
    Storyline,
    Strategy,
    WordNormalizer,
    default_normalizer,
    normalize_word,
)

__all__ = ["oracle_step_distribution", "oracle_advance"]


def _mlm_context_ids(tokens: Sequence[str], mlm: TableMLMModel) -> list[int]:
    ids = []
    for tok in tokens:
        tid = mlm.vocabulary.get(tok)
        if tid is not None:
            ids.append(tid)
    return ids


def _log_softmax(values: list[float]) -> list[float]:
    top = max(values)
    total = sum(math.exp(v - top) for v in values)
    log_total = top + math.log(total)
    return [v - log_total for v in values]


def _scores_for_step(
    state: GenerationState,
    ar: TableARModel,
    mlm: TableMLMModel | None,
    alignment: AlignmentMap | None,
    storyline: Storyline,
    config: DecodingConfig,
) -> list[float]:
    size = len(ar.vocabulary)
    context = list(state.context_ids)
    ar_row = ar.probability_row(context)
    scores = [math.log(float(ar_row[t])) for t in range(size)]

    pending = storyline[state.phrase_index] if state.phrase_index < len(storyline) else None
    if config.strategy is Strategy.AR_ONLY or pending is None:
        return scores

    assert mlm is not None and alignment is not None
    left_tokens = [ar.vocabulary.token(t) for t in context]
    right_tokens = pending.surface.split()
    left_ids = _mlm_context_ids(left_tokens, mlm)
    right_ids = _mlm_context_ids(right_tokens, mlm)
    mlm_row = mlm.probability_row(left_ids, right_ids)
    mlm_logs = [math.log(float(p)) for p in mlm_row]
    if config.renormalize_shared:
        shared_ids = sorted(set(alignment.ar_to_mlm.values()))
        renormed = _log_softmax([mlm_logs[m] for m in shared_ids])
        for m, v in zip(shared_ids, renormed):
            mlm_logs[m] = v
    fused = []
    for t in range(size):
        m = alignment.ar_to_mlm.get(t)
        contribution = mlm_logs[m] if m is not None else config.unshared_fill
        fused.append(scores[t] + contribution)
    scores = fused

    if config.strategy is Strategy.FUSION_BOOST:
        step = state.step + 1
        lam = config.lambda0 * (step - state.last_insertion_step)
        w1 = pending.first_token_id
        ordered = sorted(range(size), key=lambda t: (-scores[t], t))
        s_min = min(scores)
        s_max = max(scores)
        s_k = scores[ordered[min(config.k, size) - 1]]
        if s_max == s_min:
            alpha = 1.0
        else:
            alpha = (scores[w1] - s_min) / (s_max - s_min)
        delta = s_max - s_k
        scores = list(scores)
        scores[w1] = max(scores[w1], s_k + lam * alpha * delta)
    return scores


def oracle_step_distribution(
    state: GenerationState,
    ar: TableARModel,
    mlm: TableMLMModel | None,
    alignment: AlignmentMap | None,
    storyline: Storyline,
    config: DecodingConfig,
) -> dict[int, float]:
    """Exact categorical distribution the engine should sample from."""
    scores = _scores_for_step(state, ar, mlm, alignment, storyline, config)
    size = len(scores)
    ordered = sorted(range(size), key=lambda t: (-scores[t], t))
    candidates = ordered[: min(config.k, size)]
    logits = [scores[t] / config.temperature for t in candidates]
    top = max(logits)
    weights = [math.exp(v - top) for v in logits]
    total = sum(weights)
    return {t: w / total for t, w in zip(candidates, weights)}


def oracle_advance(
    state: GenerationState,
    chosen_id: int,
    ar: TableARModel,
    storyline: Storyline,
    config: DecodingConfig,
    normalizer: WordNormalizer = default_normalizer,
) -> GenerationState:
    """Mirror of the engine's state transition for word-level toy models."""
    new = state.clone()
    new.generated_ids.append(chosen_id)
    if ar.eos_id is not None and chosen_id == ar.eos_id:
        return new
    if config.strategy is Strategy.AR_ONLY or new.phrase_index >= len(storyline):
        return new
    pending = storyline[new.phrase_index]
    exact = chosen_id == pending.first_token_id
    word = normalize_word(ar.vocabulary.token(chosen_id), normalizer)
    if not exact and word != pending.normalized_first_word:
        return new
    if exact:
        splice = list(pending.token_ids[1:])
    else:
        splice = [ar.vocabulary.id_of(w) for w in pending.words[1:]]
    room = config.max_new_tokens - len(new.generated_ids)
    new.generated_ids.extend(splice[:room])
    if len(splice) <= room:
        new.insertion_log.append((new.phrase_index, len(new.generated_ids)))
        new.last_insertion_step = len(new.generated_ids)
        new.phrase_index += 1
    return new
