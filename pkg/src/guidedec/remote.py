"""Clients for the HTTP score-serving protocol.

The server exposes /v1/info, /v1/vocab, /v1/merges, /v1/ar_scores and
/v1/mlm_scores; the engine reconstructs each model's tokenizer from the
served vocabulary and merges so its segmentation matches the server's.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
import requests

from .tokenization import ByteLevelBPETokenizer, Tokenizer, WordTokenizer
from .types import Vocabulary

__all__ = ["RemoteARModel", "RemoteMLMModel", "connect_remote"]

_EOS_CANDIDATES = ("<|endoftext|>", "</s>", "<eos>")
_TIMEOUT = 60.0


class RemoteError(RuntimeError):
    pass


def _get_json(session: requests.Session, url: str, **params) -> dict | list:
    resp = session.get(url, params=params or None, timeout=_TIMEOUT)
    if resp.status_code != 200:
        raise RemoteError(f"GET {url} -> {resp.status_code}: {resp.text[:200]}")
    return resp.json()


def _post_scores(session: requests.Session, url: str, payload: dict) -> np.ndarray:
    resp = session.post(url, json=payload, timeout=_TIMEOUT)
    if resp.status_code != 200:
        raise RemoteError(f"POST {url} -> {resp.status_code}: {resp.text[:200]}")
    return np.asarray(resp.json()["scores"], dtype=np.float64)


def _build_tokenizer(vocab: Vocabulary, merges_payload: dict) -> Tokenizer:
    style = merges_payload.get("style", "bbpe")
    if style == "word":
        return WordTokenizer(vocab)
    return ByteLevelBPETokenizer(vocab, merges_payload.get("merges", []))


class RemoteARModel:
    def __init__(self, base_url: str, session: requests.Session, info: dict, vocab: Vocabulary, tokenizer: Tokenizer):
        self._base = base_url.rstrip("/")
        self._session = session
        self.vocabulary = vocab
        self.tokenizer = tokenizer
        self.normalized = bool(info["normalized"])
        self.model_name = info["ar_model_name"]
        self.eos_id = next((vocab.get(t) for t in _EOS_CANDIDATES if t in vocab), None)

    def score(self, context_ids: Sequence[int]) -> np.ndarray:
        return _post_scores(
            self._session, f"{self._base}/v1/ar_scores", {"context_ids": [int(i) for i in context_ids]}
        )


class RemoteMLMModel:
    def __init__(self, base_url: str, session: requests.Session, info: dict, vocab: Vocabulary, tokenizer: Tokenizer):
        self._base = base_url.rstrip("/")
        self._session = session
        self.vocabulary = vocab
        self.tokenizer = tokenizer
        self.normalized = bool(info["normalized"])
        self.model_name = info["mlm_model_name"]

    def score_masked(self, left_ids: Sequence[int], right_ids: Sequence[int]) -> np.ndarray:
        return _post_scores(
            self._session,
            f"{self._base}/v1/mlm_scores",
            {"left_ids": [int(i) for i in left_ids], "right_ids": [int(i) for i in right_ids]},
        )


def connect_remote(base_url: str, session: requests.Session | None = None):
    """Fetch server metadata and return the (AR, MLM) client pair."""
    session = session or requests.Session()
    base = base_url.rstrip("/")
    info = _get_json(session, f"{base}/v1/info")
    ar_vocab = Vocabulary(_get_json(session, f"{base}/v1/vocab", model="ar"))
    mlm_vocab = Vocabulary(_get_json(session, f"{base}/v1/vocab", model="mlm"))
    if len(ar_vocab) != info["ar_vocab_size"] or len(mlm_vocab) != info["mlm_vocab_size"]:
        raise RemoteError("served vocabulary sizes disagree with /v1/info")
    ar_tok = _build_tokenizer(ar_vocab, _get_json(session, f"{base}/v1/merges", model="ar"))
    mlm_tok = _build_tokenizer(mlm_vocab, _get_json(session, f"{base}/v1/merges", model="mlm"))
    ar = RemoteARModel(base, session, info, ar_vocab, ar_tok)
    mlm = RemoteMLMModel(base, session, info, mlm_vocab, mlm_tok)
    return ar, mlm
