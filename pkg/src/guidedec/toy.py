"""Deterministic table-driven toy backends for desk-scale verification.

A toy fixture is one JSON file holding both models:

    {
      "vocabulary": ["a", "b", "c", "d"],
      "eos": null,
      "ar":  {"order": 1,
              "default": [0.25, 0.25, 0.25, 0.25],
              "rows": {"a": [0.1, 0.6, 0.2, 0.1]}},
      "mlm_vocabulary": null,
      "mlm": {"default": [0.25, 0.25, 0.25, 0.25],
              "rows": {"a|b": [0.1, 0.5, 0.3, 0.1]}}
    }

AR rows are keyed by the space-joined last ``order`` context tokens (the
empty key is the unconditional row). MLM rows are keyed "left|right" on the
last left-context token and the first right-context token, either side
empty when that context is empty. Rows must be strictly positive and sum
to 1 (a zero would produce an infinite log-score).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .tokenization import WordTokenizer
from .types import Vocabulary

__all__ = ["TableARModel", "TableMLMModel", "load_toy_fixture", "load_toy_pair"]

_ROW_TOLERANCE = 1e-9


def _check_row(row: Sequence[float], size: int, label: str) -> np.ndarray:
    arr = np.asarray(row, dtype=np.float64)
    if arr.shape != (size,):
        raise ValueError(f"{label}: row length {arr.shape} != vocabulary size {size}")
    if (arr <= 0).any():
        raise ValueError(f"{label}: probabilities must be strictly positive")
    if abs(arr.sum() - 1.0) > _ROW_TOLERANCE:
        raise ValueError(f"{label}: row sums to {arr.sum()}, not 1")
    return arr


class TableARModel:
    """Next-token distribution read from a context table.

    ``order`` is the context window (0, 1 or 2 trailing tokens); contexts
    without an explicit row fall back to the default row.
    """

    normalized = True

    def __init__(
        self,
        vocabulary: Vocabulary,
        order: int,
        rows: Mapping[str, Sequence[float]],
        default_row: Sequence[float] | None = None,
        eos_token: str | None = None,
    ):
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        self.vocabulary = vocabulary
        self.tokenizer = WordTokenizer(vocabulary)
        self.order = order
        size = len(vocabulary)
        self._rows = {key: _check_row(row, size, f"ar row {key!r}") for key, row in rows.items()}
        self._default = None if default_row is None else _check_row(default_row, size, "ar default")
        self.eos_id = vocabulary.id_of(eos_token) if eos_token is not None else None

    def _context_key(self, context_ids: Sequence[int]) -> str:
        tail = list(context_ids)[-self.order:] if self.order else []
        return " ".join(self.vocabulary.token(i) for i in tail)

    def probability_row(self, context_ids: Sequence[int]) -> np.ndarray:
        key = self._context_key(context_ids)
        row = self._rows.get(key)
        if row is None:
            row = self._default
        if row is None:
            raise ValueError(f"no row for context {key!r} and no default row")
        return row

    def score(self, context_ids: Sequence[int]) -> np.ndarray:
        return np.log(self.probability_row(context_ids))


class TableMLMModel:
    """Masked-position distribution keyed by the tokens flanking the mask."""

    normalized = True

    def __init__(
        self,
        vocabulary: Vocabulary,
        rows: Mapping[str, Sequence[float]],
        default_row: Sequence[float] | None = None,
    ):
        self.vocabulary = vocabulary
        self.tokenizer = WordTokenizer(vocabulary)
        size = len(vocabulary)
        self._rows = {}
        for key, row in rows.items():
            if key.count("|") != 1:
                raise ValueError(f"mlm row key {key!r} must be 'left|right'")
            self._rows[key] = _check_row(row, size, f"mlm row {key!r}")
        self._default = None if default_row is None else _check_row(default_row, size, "mlm default")

    def probability_row(self, left_ids: Sequence[int], right_ids: Sequence[int]) -> np.ndarray:
        left = self.vocabulary.token(left_ids[-1]) if left_ids else ""
        right = self.vocabulary.token(right_ids[0]) if right_ids else ""
        row = self._rows.get(f"{left}|{right}")
        if row is None:
            row = self._default
        if row is None:
            raise ValueError(f"no mlm row for {left!r}|{right!r} and no default row")
        return row

    def score_masked(self, left_ids: Sequence[int], right_ids: Sequence[int]) -> np.ndarray:
        return np.log(self.probability_row(left_ids, right_ids))


def load_toy_fixture(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        spec = json.load(fh)
    for key in ("vocabulary", "ar"):
        if key not in spec:
            raise ValueError(f"{path}: toy fixture missing {key!r}")
    return spec


def load_toy_pair(path: str | Path) -> tuple[TableARModel, TableMLMModel | None]:
    """Build the (AR, MLM) pair a toy fixture file describes."""
    spec = load_toy_fixture(path)
    vocab = Vocabulary(spec["vocabulary"])
    ar_spec = spec["ar"]
    ar = TableARModel(
        vocab,
        order=int(ar_spec.get("order", 1)),
        rows=ar_spec.get("rows", {}),
        default_row=ar_spec.get("default"),
        eos_token=spec.get("eos"),
    )
    mlm_spec = spec.get("mlm")
    if mlm_spec is None:
        return ar, None
    mlm_vocab = Vocabulary(spec["mlm_vocabulary"]) if spec.get("mlm_vocabulary") else vocab
    mlm = TableMLMModel(
        mlm_vocab,
        rows=mlm_spec.get("rows", {}),
        default_row=mlm_spec.get("default"),
    )
    return ar, mlm
