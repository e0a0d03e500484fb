"""HTTP surface: five endpoints over a score provider.

Request bodies are parsed by hand so the status-code contract stays exact:
400 malformed JSON or bad query params, 413 over-long contexts, 422 ids
outside the vocabulary, 503 while models load, 405 for HEAD. Handlers keep
no per-request state; concurrency is limited only by the provider.
"""

from __future__ import annotations

from contextlib import asynccontextmanager
from typing import Callable

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .providers import ContextTooLong, InvalidIds, Provider

__all__ = ["create_app"]


def create_app(
    provider: Provider | None = None,
    loader: Callable[[], Provider] | None = None,
) -> FastAPI:
    """Build the app; until ``provider`` is set (directly or by the startup
    loader) every endpoint answers 503."""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if loader is not None:
            app.state.provider = loader()
        yield

    app = FastAPI(title="scoreserver", lifespan=lifespan)
    app.state.provider = provider

    @app.middleware("http")
    async def reject_head(request: Request, call_next):
        if request.method == "HEAD":
            return JSONResponse({"detail": "method not allowed"}, status_code=405)
        return await call_next(request)

    def ready(request: Request) -> Provider:
        current = request.app.state.provider
        if current is None:
            raise HTTPException(status_code=503, detail="models are loading")
        return current

    def model_param(model: str) -> str:
        if model not in ("ar", "mlm"):
            raise HTTPException(status_code=400, detail="model must be 'ar' or 'mlm'")
        return model

    async def read_object(request: Request) -> dict:
        try:
            payload = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="malformed JSON body") from None
        if not isinstance(payload, dict):
            raise HTTPException(status_code=400, detail="body must be a JSON object")
        return payload

    def id_list(payload: dict, field: str) -> list:
        value = payload.get(field)
        if not isinstance(value, list):
            raise HTTPException(status_code=422, detail=f"'{field}' must be a list of token ids")
        return value

    @app.get("/v1/info")
    async def info(request: Request):
        return ready(request).info()

    @app.get("/v1/vocab")
    async def vocab(request: Request, model: str = ""):
        return ready(request).vocab(model_param(model))

    @app.get("/v1/merges")
    async def merges(request: Request, model: str = ""):
        return ready(request).merges(model_param(model))

    @app.post("/v1/ar_scores")
    async def ar_scores(request: Request):
        provider = ready(request)
        payload = await read_object(request)
        ids = id_list(payload, "context_ids")
        try:
            return {"scores": provider.ar_scores(ids)}
        except InvalidIds as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        except ContextTooLong as exc:
            raise HTTPException(status_code=413, detail=str(exc)) from None

    @app.post("/v1/mlm_scores")
    async def mlm_scores(request: Request):
        provider = ready(request)
        payload = await read_object(request)
        left = id_list(payload, "left_ids")
        right = id_list(payload, "right_ids")
        try:
            scores, truncated = provider.mlm_scores(left, right)
        except InvalidIds as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        except ContextTooLong as exc:
            raise HTTPException(status_code=413, detail=str(exc)) from None
        return {"scores": scores, "truncated": truncated}

    return app
