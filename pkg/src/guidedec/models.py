"""Contracts for the two score sources the decoder consumes.

An autoregressive backend scores the next token from left context; a masked
backend scores the single masked position between a left and a right
context, possibly over a different vocabulary. Backends that emit raw
logits declare ``normalized = False`` and the engine applies log-softmax
before any score leaves this module.
"""

from __future__ import annotations

from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .tokenization import Tokenizer
from .types import Vocabulary

__all__ = [
    "AutoregressiveModel",
    "MaskedModel",
    "ScorerModel",
    "log_softmax",
    "log_prob_score",
    "masked_log_prob_score",
    "sequence_log_prob",
]


@runtime_checkable
class AutoregressiveModel(Protocol):
    vocabulary: Vocabulary
    tokenizer: Tokenizer
    normalized: bool
    eos_id: int | None

    def score(self, context_ids: Sequence[int]) -> np.ndarray: ...


@runtime_checkable
class MaskedModel(Protocol):
    vocabulary: Vocabulary
    tokenizer: Tokenizer
    normalized: bool

    def score_masked(self, left_ids: Sequence[int], right_ids: Sequence[int]) -> np.ndarray: ...


@runtime_checkable
class ScorerModel(Protocol):
    """Anything that can assign a chain-rule log-probability to a sequence.

    Autoregressive models qualify via the stepwise fallback in
    :func:`sequence_log_prob`.
    """

    vocabulary: Vocabulary


def log_softmax(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    shifted = values - values.max()
    return shifted - np.log(np.exp(shifted).sum())


def _validate_ids(ids: Sequence[int], vocab_size: int) -> None:
    for tid in ids:
        if not 0 <= int(tid) < vocab_size:
            raise ValueError(f"unknown token id {tid}")


def _finalize(raw: np.ndarray, vocab_size: int, normalized: bool) -> np.ndarray:
    scores = np.asarray(raw, dtype=np.float64)
    if scores.shape != (vocab_size,):
        raise ValueError("score/vocabulary size mismatch")
    if not normalized:
        scores = log_softmax(scores)
    if not np.isfinite(scores).all():
        raise ValueError("non-finite scores from backend")
    return scores


def log_prob_score(model: AutoregressiveModel, context_ids: Sequence[int]) -> np.ndarray:
    """log p(next token | context) over the model's vocabulary.

    An empty context yields the unconditional next-token distribution.
    """
    size = len(model.vocabulary)
    _validate_ids(context_ids, size)
    return _finalize(model.score(context_ids), size, model.normalized)


def masked_log_prob_score(
    model: MaskedModel, left_ids: Sequence[int], right_ids: Sequence[int]
) -> np.ndarray:
    """log-probabilities for the single masked position between the contexts."""
    size = len(model.vocabulary)
    _validate_ids(left_ids, size)
    _validate_ids(right_ids, size)
    return _finalize(model.score_masked(left_ids, right_ids), size, model.normalized)


def sequence_log_prob(model, ids: Sequence[int]) -> float:
    """Chain-rule log-probability of ``ids``: sum of per-step next-token scores.

    Backends with a native ``sequence_log_prob`` method (e.g. a remote scorer
    that batches internally) are used directly; otherwise the sum is built
    from stepwise :func:`log_prob_score` calls.
    """
    ids = list(ids)
    if not ids:
        raise ValueError("empty sequence")
    native = getattr(model, "sequence_log_prob", None)
    if callable(native):
        return float(native(ids))
    total = 0.0
    for i, tok in enumerate(ids):
        total += float(log_prob_score(model, ids[:i])[tok])
    return total
