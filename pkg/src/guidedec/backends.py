"""Backend selection: `toy:<fixture-path>` or `remote:<base-url>`.

The AR and masked backends are selected independently; a single --backend
value covers both when they come from the same fixture or server.
GUIDEDEC_BACKEND_URL supplies a default remote base URL.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .models import AutoregressiveModel, MaskedModel
from .toy import load_toy_pair

__all__ = ["BackendError", "BackendPair", "resolve_backends", "resolve_scorer"]

ENV_BACKEND_URL = "GUIDEDEC_BACKEND_URL"


class BackendError(ValueError):
    pass


@dataclass
class BackendPair:
    ar: AutoregressiveModel
    mlm: MaskedModel | None


def _parse(spec: str) -> tuple[str, str]:
    kind, sep, rest = spec.partition(":")
    if not sep or kind not in ("toy", "remote") or not rest:
        raise BackendError(f"bad backend spec {spec!r}; expected toy:<path> or remote:<url>")
    return kind, rest


def _load(spec: str, want: str, cache: dict):
    """want is "ar" or "mlm"; loads share a cache per fixture/server."""
    kind, target = _parse(spec)
    key = (kind, target)
    if key not in cache:
        try:
            if kind == "toy":
                cache[key] = load_toy_pair(target)
            else:
                from .remote import connect_remote

                cache[key] = connect_remote(target)
        except BackendError:
            raise
        except Exception as exc:
            raise BackendError(f"cannot load backend {spec!r}: {exc}") from exc
    ar, mlm = cache[key]
    return ar if want == "ar" else mlm


def resolve_backends(
    backend: str | None = None,
    ar_backend: str | None = None,
    mlm_backend: str | None = None,
    env: dict | None = None,
) -> BackendPair:
    env = os.environ if env is None else env
    default_url = env.get(ENV_BACKEND_URL)
    fallback = backend or (f"remote:{default_url}" if default_url else None)
    ar_spec = ar_backend or fallback
    mlm_spec = mlm_backend or fallback
    if ar_spec is None:
        raise BackendError("no autoregressive backend; pass --backend or --ar-backend")
    cache: dict = {}
    ar = _load(ar_spec, "ar", cache)
    mlm = _load(mlm_spec, "mlm", cache) if mlm_spec else None
    if ar is None:
        raise BackendError(f"{ar_spec!r} provides no autoregressive model")
    return BackendPair(ar=ar, mlm=mlm)


def resolve_scorer(scorer_backend: str | None, pair: BackendPair):
    """Model used for perplexity; defaults to the AR backend itself."""
    if scorer_backend is None:
        return pair.ar
    cache: dict = {}
    scorer = _load(scorer_backend, "ar", cache)
    if scorer is None:
        raise BackendError(f"{scorer_backend!r} provides no scorer model")
    return scorer
