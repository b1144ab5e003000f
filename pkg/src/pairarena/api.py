"""HTTP surface over the arena service.

Endpoints:
  POST /runs                      create (or resume) a run from a config body
  GET  /runs/{run_id}             run manifest
  GET  /runs/{run_id}/leaderboard rating entries plus win-rate table
  GET  /annotation/next?annotator=ID    next blinded task, 204 when drained
  POST /annotation/judgment       submit one five-point label
  GET  /runs/{run_id}/agreement   human-vs-judge agreement report
"""

from __future__ import annotations

from fastapi import Body, FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware

from .agreement import AgreementError, FivePointLabel
from .service import (
    ArenaService,
    ConflictError,
    InsufficientOverlapError,
    NotFoundError,
    RunConfig,
    StageIncompleteError,
)


def create_app(service: ArenaService) -> FastAPI:
    app = FastAPI(title="pairarena", version="0.1.0")
    # The annotation UI is served as static files from elsewhere; payloads
    # carry no credentials, so a permissive CORS policy is fine.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.post("/runs", status_code=201)
    def create_run(config: dict = Body(...)) -> dict:
        try:
            run_config = RunConfig.from_dict(config)
        except (KeyError, ValueError, TypeError) as exc:
            raise HTTPException(status_code=422, detail=f"bad config: {exc}")
        try:
            run_id = service.create_run(run_config)
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"run_id": run_id}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> dict:
        try:
            return service.get_manifest(run_id)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/runs/{run_id}/leaderboard")
    def get_leaderboard(run_id: str) -> dict:
        try:
            return service.get_leaderboard(run_id)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except StageIncompleteError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/annotation/next")
    def next_annotation(annotator: str = Query(...)):
        payload = service.next_annotation_item(annotator)
        if payload is None:
            return Response(status_code=204)
        return payload

    @app.post("/annotation/judgment")
    def submit_annotation(body: dict = Body(...)) -> dict:
        try:
            annotator_id = str(body["annotator_id"])
            task_id = str(body["task_id"])
            label = FivePointLabel(body["label"])
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"bad submission: {exc}")
        try:
            return service.submit_annotation(annotator_id, task_id, label)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/runs/{run_id}/agreement")
    def get_agreement(run_id: str) -> dict:
        try:
            return service.agreement_report(run_id).to_record()
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except InsufficientOverlapError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except AgreementError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    return app
