"""Score providers behind the HTTP endpoints.

A provider owns the two models and answers raw-id scoring requests. The
bundled ToyProvider reads the deterministic table-model fixture format
(one JSON file with "vocabulary", "ar" and "mlm" sections); HFProvider
wraps a pretrained causal-LM / masked-LM pair when transformers is
installed.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

__all__ = ["InvalidIds", "ContextTooLong", "Provider", "ToyProvider", "HFProvider"]


class InvalidIds(ValueError):
    pass


class ContextTooLong(ValueError):
    pass


class Provider(Protocol):
    def info(self) -> dict: ...

    def vocab(self, model: str) -> list[str]: ...

    def merges(self, model: str) -> dict: ...

    def ar_scores(self, context_ids: Sequence[int]) -> list[float]: ...

    def mlm_scores(
        self, left_ids: Sequence[int], right_ids: Sequence[int]
    ) -> tuple[list[float], bool]: ...


def _check_ids(ids: Sequence[int], size: int) -> list[int]:
    checked = []
    for i in ids:
        if not isinstance(i, int) or isinstance(i, bool) or not 0 <= i < size:
            raise InvalidIds(f"token id {i!r} outside vocabulary of size {size}")
        checked.append(i)
    return checked


class ToyProvider:
    """Table models loaded from a toy fixture file; fully deterministic."""

    def __init__(self, fixture_path: str | Path, max_context: int = 512):
        with open(fixture_path, encoding="utf-8") as fh:
            spec = json.load(fh)
        self._vocab: list[str] = list(spec["vocabulary"])
        self._mlm_vocab: list[str] = list(spec.get("mlm_vocabulary") or self._vocab)
        self.max_context = max_context
        self._name = Path(fixture_path).stem

        ar = spec["ar"]
        self._order = int(ar.get("order", 1))
        self._ar_rows = {k: np.asarray(v, dtype=np.float64) for k, v in ar.get("rows", {}).items()}
        self._ar_default = (
            np.asarray(ar["default"], dtype=np.float64) if ar.get("default") else None
        )
        mlm = spec.get("mlm") or {}
        self._mlm_rows = {k: np.asarray(v, dtype=np.float64) for k, v in mlm.get("rows", {}).items()}
        self._mlm_default = (
            np.asarray(mlm["default"], dtype=np.float64) if mlm.get("default") else None
        )

    def info(self) -> dict:
        return {
            "ar_model_name": f"toy:{self._name}:ar",
            "mlm_model_name": f"toy:{self._name}:mlm",
            "ar_vocab_size": len(self._vocab),
            "mlm_vocab_size": len(self._mlm_vocab),
            "normalized": True,
        }

    def vocab(self, model: str) -> list[str]:
        return list(self._vocab if model == "ar" else self._mlm_vocab)

    def merges(self, model: str) -> dict:
        return {"model": model, "style": "word", "merges": []}

    def _row(self, rows, default, key: str) -> np.ndarray:
        row = rows.get(key)
        if row is None:
            row = default
        if row is None:
            raise InvalidIds(f"no table row for context {key!r}")
        return row

    def ar_scores(self, context_ids: Sequence[int]) -> list[float]:
        ids = _check_ids(context_ids, len(self._vocab))
        if len(ids) > self.max_context:
            raise ContextTooLong(f"context of {len(ids)} ids exceeds window {self.max_context}")
        tail = ids[-self._order:] if self._order else []
        key = " ".join(self._vocab[i] for i in tail)
        return np.log(self._row(self._ar_rows, self._ar_default, key)).tolist()

    def mlm_scores(
        self, left_ids: Sequence[int], right_ids: Sequence[int]
    ) -> tuple[list[float], bool]:
        left = _check_ids(left_ids, len(self._mlm_vocab))
        right = _check_ids(right_ids, len(self._mlm_vocab))
        if len(right) + 1 > self.max_context:
            raise ContextTooLong("right context exceeds the model window")
        truncated = False
        # Keep the mask plus right context inside the window; drop oldest
        # left-context ids first.
        room = self.max_context - len(right) - 1
        if len(left) > room:
            left = left[len(left) - room:]
            truncated = True
        left_tok = self._mlm_vocab[left[-1]] if left else ""
        right_tok = self._mlm_vocab[right[0]] if right else ""
        row = self._row(self._mlm_rows, self._mlm_default, f"{left_tok}|{right_tok}")
        return np.log(row).tolist(), truncated


class HFProvider:
    """Pretrained causal-LM / masked-LM pair served over the same protocol.

    Requires the optional transformers + torch extras; scores are returned
    as log-probabilities (normalized = true).
    """

    def __init__(self, ar_model_name: str, mlm_model_name: str, device: str = "cpu"):
        import torch
        from transformers import (
            AutoModelForCausalLM,
            AutoModelForMaskedLM,
            AutoTokenizer,
        )

        self._torch = torch
        self.device = device
        self.ar_name = ar_model_name
        self.mlm_name = mlm_model_name
        self._ar_tok = AutoTokenizer.from_pretrained(ar_model_name)
        self._mlm_tok = AutoTokenizer.from_pretrained(mlm_model_name)
        self._ar = AutoModelForCausalLM.from_pretrained(ar_model_name).to(device).eval()
        self._mlm = AutoModelForMaskedLM.from_pretrained(mlm_model_name).to(device).eval()
        self._ar_vocab = self._ordered_vocab(self._ar_tok)
        self._mlm_vocab = self._ordered_vocab(self._mlm_tok)

    @staticmethod
    def _ordered_vocab(tokenizer) -> list[str]:
        vocab = tokenizer.get_vocab()
        ordered = [""] * (max(vocab.values()) + 1)
        for token, idx in vocab.items():
            ordered[idx] = token
        return ordered

    @staticmethod
    def _tokenizer_merges(tokenizer) -> list[str]:
        try:
            state = json.loads(tokenizer.backend_tokenizer.to_str())
            merges = state["model"]["merges"]
            return [m if isinstance(m, str) else " ".join(m) for m in merges]
        except Exception:
            return []

    def info(self) -> dict:
        return {
            "ar_model_name": self.ar_name,
            "mlm_model_name": self.mlm_name,
            "ar_vocab_size": len(self._ar_vocab),
            "mlm_vocab_size": len(self._mlm_vocab),
            "normalized": True,
        }

    def vocab(self, model: str) -> list[str]:
        return list(self._ar_vocab if model == "ar" else self._mlm_vocab)

    def merges(self, model: str) -> dict:
        tokenizer = self._ar_tok if model == "ar" else self._mlm_tok
        return {"model": model, "style": "bbpe", "merges": self._tokenizer_merges(tokenizer)}

    def _window(self, model) -> int:
        return int(getattr(model.config, "max_position_embeddings", 1024))

    def ar_scores(self, context_ids: Sequence[int]) -> list[float]:
        torch = self._torch
        ids = _check_ids(context_ids, len(self._ar_vocab))
        if len(ids) + 1 > self._window(self._ar):
            raise ContextTooLong("context exceeds the model window")
        if not ids:
            bos = self._ar_tok.bos_token_id
            if bos is None:
                raise InvalidIds("empty context needs a BOS token")
            ids = [bos]
        with torch.no_grad():
            logits = self._ar(torch.tensor([ids], device=self.device)).logits[0, -1]
            return torch.log_softmax(logits.float(), dim=-1).cpu().tolist()

    def mlm_scores(
        self, left_ids: Sequence[int], right_ids: Sequence[int]
    ) -> tuple[list[float], bool]:
        torch = self._torch
        left = _check_ids(left_ids, len(self._mlm_vocab))
        right = _check_ids(right_ids, len(self._mlm_vocab))
        window = self._window(self._mlm) - 2  # room for special tokens
        if len(right) + 1 > window:
            raise ContextTooLong("right context exceeds the model window")
        truncated = False
        room = window - len(right) - 1
        if len(left) > room:
            left = left[len(left) - room:]
            truncated = True
        mask_id = self._mlm_tok.mask_token_id
        sequence = left + [mask_id] + right
        if self._mlm_tok.cls_token_id is not None:
            sequence = [self._mlm_tok.cls_token_id] + sequence + [self._mlm_tok.sep_token_id]
        position = sequence.index(mask_id)
        with torch.no_grad():
            logits = self._mlm(torch.tensor([sequence], device=self.device)).logits[0, position]
            return torch.log_softmax(logits.float(), dim=-1).cpu().tolist(), truncated
