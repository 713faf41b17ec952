"""HTTP application implementing the classify/substitutes/health protocol."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .engine import BadRequest, InferenceEngine


class ClassifyRequest(BaseModel):
    code: str
    code_pair: "str | None" = None


class OccurrenceBody(BaseModel):
    byte_start: int
    byte_end: int


class VariableBody(BaseModel):
    name: str
    occurrences: list[OccurrenceBody]


class SubstitutesRequest(BaseModel):
    code: str
    top_j: int
    top_k: int
    variables: list[VariableBody]


def create_app(engine: "InferenceEngine | None") -> FastAPI:
    app = FastAPI(title="varflip model server", docs_url=None, redoc_url=None)
    app.state.engine = engine

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed request"})

    @app.exception_handler(BadRequest)
    async def bad_request(request: Request, exc: BadRequest):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    def ready() -> "InferenceEngine | None":
        return app.state.engine

    @app.get("/v1/health")
    async def health():
        engine = ready()
        if engine is None:
            return JSONResponse(status_code=503, content={"error": "model not loaded"})
        return {"status": "ok", "model": engine.model_name}

    @app.post("/v1/classify")
    async def classify(body: ClassifyRequest):
        engine = ready()
        if engine is None:
            return JSONResponse(status_code=503, content={"error": "model not loaded"})
        label, confidences = engine.classify(body.code, body.code_pair)
        return {"label": label, "confidences": confidences}

    @app.post("/v1/substitutes")
    async def substitutes(body: SubstitutesRequest):
        engine = ready()
        if engine is None:
            return JSONResponse(status_code=503, content={"error": "model not loaded"})
        result = engine.substitutes(
            body.code, body.top_j, body.top_k,
            [v.model_dump() for v in body.variables])
        return {
            "substitutes": {
                name: [{"name": cand, "score": score} for cand, score in ranked]
                for name, ranked in result.substitutes.items()
            },
            "warnings": result.warnings,
        }

    return app
