"""Alignment between the autoregressive and masked-model vocabularies.

The two models tokenize differently, but both use byte-level BPE over the
same alphabet, so token strings that match byte-for-byte denote the same
token. The alignment maps AR token ids to masked-model ids wherever the
strings coincide; masked scores are then projected onto the AR id space
before fusion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .models import log_softmax
from .types import Vocabulary

__all__ = ["AlignmentMap", "build_alignment", "project_scores", "load_vocabulary"]


@dataclass(frozen=True)
class AlignmentMap:
    """Injective partial map AR token id -> masked-model token id."""

    ar_to_mlm: dict[int, int] = field(repr=False)
    shared_count: int = 0
    ar_size: int = 0
    mlm_size: int = 0


def build_alignment(ar_vocab: Vocabulary, mlm_vocab: Vocabulary) -> AlignmentMap:
    """Map every AR token whose exact string occurs in the masked vocabulary.

    Matching is byte equality of token strings; no normalization.
    """
    if len(ar_vocab) == 0 or len(mlm_vocab) == 0:
        raise ValueError("empty vocabulary")
    mapping: dict[int, int] = {}
    for ar_id, token in enumerate(ar_vocab.tokens):
        mlm_id = mlm_vocab.get(token)
        if mlm_id is not None:
            mapping[ar_id] = mlm_id
    return AlignmentMap(
        ar_to_mlm=mapping,
        shared_count=len(mapping),
        ar_size=len(ar_vocab),
        mlm_size=len(mlm_vocab),
    )


def project_scores(
    mlm_scores: np.ndarray,
    alignment: AlignmentMap,
    fill: float = 0.0,
    renormalize: bool = False,
) -> np.ndarray:
    """Masked-model scores rearranged onto the AR id space.

    Mapped positions carry the masked-model score, unmapped positions carry
    ``fill`` (0.0 means no masked contribution, so the AR-only score
    survives fusion untouched). With ``renormalize`` the masked
    log-probabilities are first re-normalized over the shared subset.
    """
    mlm_scores = np.asarray(mlm_scores, dtype=np.float64)
    if mlm_scores.shape != (alignment.mlm_size,):
        raise ValueError("score/vocabulary size mismatch")
    projected = np.full(alignment.ar_size, float(fill), dtype=np.float64)
    if not alignment.ar_to_mlm:
        return projected
    ar_ids = np.fromiter(alignment.ar_to_mlm.keys(), dtype=np.int64, count=alignment.shared_count)
    mlm_ids = np.fromiter(alignment.ar_to_mlm.values(), dtype=np.int64, count=alignment.shared_count)
    shared = mlm_scores[mlm_ids]
    if renormalize:
        shared = log_softmax(shared)
    projected[ar_ids] = shared
    return projected


def load_vocabulary(path: str | Path) -> Vocabulary:
    """Load a vocabulary file: a JSON array of token strings in id order."""
    with open(path, encoding="utf-8") as fh:
        tokens = json.load(fh)
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise ValueError(f"{path}: expected a JSON array of token strings")
    return Vocabulary(tokens)
