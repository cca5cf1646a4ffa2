"""HTTP interface for the campaign service."""

from __future__ import annotations

import time
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException, Query, Response

from ..config import CampaignConfig
from ..postprocessing import Method
from .core import AnnotatorExcludedError, CampaignNotFound, CampaignService
from .store import ManifestEntry, record_from_dict


def _now_ms() -> int:
    return int(time.time() * 1000)


def create_app(store_dir: Path | str) -> FastAPI:
    service = CampaignService(store_dir)
    app = FastAPI(title="softcamp campaign service")
    app.state.service = service

    @app.post("/api/campaigns")
    def create_campaign(payload: dict = Body(...)):
        try:
            config = CampaignConfig.from_dict(payload["config"])
            manifest = []
            for row_no, doc in enumerate(payload.get("manifest", []), start=1):
                try:
                    manifest.append(ManifestEntry.from_dict(doc))
                except (KeyError, ValueError) as exc:
                    raise ValueError(f"manifest row {row_no}: {exc}") from None
            campaign_id = service.create_campaign(config, manifest)
        except KeyError as exc:
            raise HTTPException(400, f"missing field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from None
        return {"campaign_id": campaign_id}

    @app.get("/api/campaigns")
    def list_campaigns():
        return {"campaigns": service.campaign_ids()}

    @app.get("/api/campaigns/{campaign_id}/next-batch")
    def next_batch(
        campaign_id: str,
        annotator: str = Query(...),
        size: int | None = Query(default=None),
        now_ms: int | None = Query(default=None),
    ):
        try:
            batch = service.next_batch(
                campaign_id, annotator, now_ms if now_ms is not None else _now_ms(), size
            )
        except CampaignNotFound:
            raise HTTPException(404, f"unknown campaign {campaign_id!r}") from None
        except AnnotatorExcludedError as exc:
            raise HTTPException(403, str(exc)) from None
        if batch is None:
            return {"batch_id": None, "items": [], "reason": "no work available"}
        return batch.to_dict()

    @app.post("/api/campaigns/{campaign_id}/annotations")
    def submit_annotations(campaign_id: str, payload: dict = Body(...)):
        docs = payload.get("records")
        if not isinstance(docs, list):
            raise HTTPException(400, "body must contain a 'records' list")
        records = []
        for row_no, doc in enumerate(docs, start=1):
            try:
                records.append(record_from_dict(doc))
            except (KeyError, TypeError, ValueError) as exc:
                raise HTTPException(400, f"record {row_no}: {exc}") from None
        try:
            result = service.submit_annotations(campaign_id, records)
        except CampaignNotFound:
            raise HTTPException(404, f"unknown campaign {campaign_id!r}") from None
        return {"accepted": result.accepted, "rejected": result.rejected}

    @app.get("/api/campaigns/{campaign_id}/progress")
    def progress(campaign_id: str):
        try:
            return service.progress(campaign_id)
        except CampaignNotFound:
            raise HTTPException(404, f"unknown campaign {campaign_id!r}") from None

    @app.get("/api/campaigns/{campaign_id}/export")
    def export(
        campaign_id: str,
        method: str = Query(default="RAW"),
        format: str = Query(default="csv"),
    ):
        try:
            method_enum = Method(method.upper())
        except ValueError:
            raise HTTPException(400, f"unknown method {method!r}") from None
        try:
            text = service.export_text(campaign_id, method_enum, format)
        except CampaignNotFound:
            raise HTTPException(404, f"unknown campaign {campaign_id!r}") from None
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from None
        media = "text/csv" if format == "csv" else "application/x-ndjson"
        return Response(content=text, media_type=media)

    @app.get("/api/campaigns/{campaign_id}/annotators/{annotator_id}")
    def annotator_info(campaign_id: str, annotator_id: str):
        try:
            return service.annotator_info(campaign_id, annotator_id)
        except CampaignNotFound:
            raise HTTPException(404, f"unknown campaign {campaign_id!r}") from None

    @app.post("/api/campaigns/{campaign_id}/annotators/{annotator_id}/exclude")
    def exclude_annotator(campaign_id: str, annotator_id: str):
        try:
            return service.exclude_annotator(campaign_id, annotator_id)
        except CampaignNotFound:
            raise HTTPException(404, f"unknown campaign {campaign_id!r}") from None

    return app
