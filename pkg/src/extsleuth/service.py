"""Local HTTP service for the dashboard: submit analyses, poll results,
stream event logs, rerun scenarios, and browse artifact files.

Binds to loopback by default (extsleuth serve). Each analysis runs in one
worker thread; the record table is the only shared state.
"""

from __future__ import annotations

import json
import mimetypes
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse

from . import config
from .ingest import IngestError, detect_artifact_kind, ingest
from .pipeline import AnalysisOptions, analyze_bytes
from .report import ReportStore, report_to_dict
from .sandbox.events import EventLog
from .sandbox.scenario import ScenarioError, parse_scenario
from .staticrules import RuleConfig

STATE_QUEUED = "queued"
STATE_RUNNING = "running"
STATE_DONE = "done"
STATE_FAILED = "failed"


@dataclass
class AnalysisRecord:
    id: str
    state: str
    digest: str
    scenario_hash: str
    created_at: float
    parent: str | None = None
    cached: bool = False
    error: str | None = None
    report: dict | None = None
    events_text: str = ""
    live_log: EventLog | None = None
    scenario_raw: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "state": self.state,
            "digest": self.digest,
            "scenarioHash": self.scenario_hash,
            "createdAt": self.created_at,
            "cached": self.cached,
        }
        if self.parent:
            out["parent"] = self.parent
        if self.error:
            out["error"] = self.error
        if self.report is not None:
            out["report"] = self.report
        return out


class ServiceState:
    def __init__(self, store: ReportStore, rules: RuleConfig, llm_adapter,
                 workers: int):
        self.store = store
        self.rules = rules
        self.llm_adapter = llm_adapter
        self.records: dict[str, AnalysisRecord] = {}
        self.lock = threading.Lock()
        self.executor = ThreadPoolExecutor(max_workers=max(1, workers))
        self.artifact_cache: dict[str, object] = {}

    def get_artifact(self, digest: str):
        with self.lock:
            cached = self.artifact_cache.get(digest)
        if cached is not None:
            return cached
        data, hint = self.store.load_artifact(digest)
        if data is None:
            return None
        artifact = ingest(data, hint)
        with self.lock:
            self.artifact_cache[digest] = artifact
        return artifact


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def create_app(store_dir: str, rules: RuleConfig | None = None,
               llm_adapter=None, workers: int = 2,
               ui_dir: str | None = None) -> FastAPI:
    store = ReportStore(store_dir)
    state = ServiceState(
        store, rules or RuleConfig.load_defaults(), llm_adapter, workers
    )
    app = FastAPI(title="extsleuth", version=config.TOOL_VERSION)
    app.state.analysis = state

    def submit(data: bytes, hint_name: str, scenario_raw: dict,
               parent: str | None = None):
        try:
            kind = detect_artifact_kind(data, hint_name)
        except IngestError as exc:
            return _error(400, f"undecodable artifact: {exc}")
        try:
            scenario = parse_scenario(scenario_raw, kind)
        except ScenarioError as exc:
            return _error(422, str(exc))
        skip_llm = bool(scenario_raw.get("skipLlm"))
        options = AnalysisOptions(
            kind=kind,
            scenario=scenario,
            rules=RuleConfig.load_defaults(
                reference_date_ms=scenario.virtual_start_ms
            ) if scenario.virtual_start_ms != state.rules.reference_date_ms
            else state.rules,
            llm_adapter=state.llm_adapter,
            skip_llm=skip_llm,
            store=state.store,
        )
        from .ingest import compute_digest, unpack_artifact
        from .pipeline import scenario_identity

        try:
            digest = compute_digest(unpack_artifact(data, kind))
        except IngestError as exc:
            return _error(400, f"unreadable archive: {exc}")
        scenario_hash = scenario_identity(scenario, options)
        record_id = f"{digest[:16]}{scenario_hash[:16]}"

        with state.lock:
            existing = state.records.get(record_id)
            if existing is not None:
                payload = existing.to_json()
                payload["cached"] = True
                return JSONResponse(payload, status_code=202)
            record = AnalysisRecord(
                id=record_id, state=STATE_QUEUED, digest=digest,
                scenario_hash=scenario_hash, created_at=time.time(),
                parent=parent, scenario_raw=scenario_raw,
            )
            state.records[record_id] = record

        def register_log(log: EventLog):
            record.live_log = log

        options.on_event_log = register_log

        def worker():
            record.state = STATE_RUNNING
            try:
                result = analyze_bytes(data, hint_name, options)
                record.report = report_to_dict(result.report)
                record.events_text = result.events_text
                record.cached = result.cached
                record.state = STATE_DONE
            except Exception as exc:  # analysis failures become record state
                record.error = f"{type(exc).__name__}: {exc}"
                record.state = STATE_FAILED
            finally:
                if record.live_log is not None and not record.live_log.closed:
                    record.live_log.close()

        state.executor.submit(worker)
        return JSONResponse(record.to_json(), status_code=202)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": config.TOOL_VERSION}

    @app.post("/analyses")
    async def post_analysis(request: Request):
        content_type = request.headers.get("content-type", "")
        scenario_raw: dict = {}
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            upload = form.get("artifact")
            if upload is None:
                return _error(400, "multipart field 'artifact' required")
            data = await upload.read()
            hint = getattr(upload, "filename", "") or ""
            scenario_text = form.get("scenario")
            if scenario_text:
                try:
                    scenario_raw = json.loads(scenario_text)
                except ValueError as exc:
                    return _error(422, f"scenario is not valid JSON: {exc}")
        else:
            data = await request.body()
            hint = request.headers.get("x-filename", "")
        if not data:
            return _error(400, "empty upload")
        return submit(data, hint, scenario_raw)

    @app.get("/analyses/{analysis_id}")
    def get_analysis(analysis_id: str):
        record = state.records.get(analysis_id)
        if record is None:
            return _error(404, "unknown analysis id")
        return record.to_json()

    @app.post("/analyses/{analysis_id}/rerun")
    async def rerun(analysis_id: str, request: Request):
        record = state.records.get(analysis_id)
        if record is None:
            return _error(404, "unknown analysis id")
        try:
            scenario_raw = await request.json()
        except ValueError:
            scenario_raw = {}
        if not isinstance(scenario_raw, dict):
            return _error(422, "scenario body must be a JSON object")
        data, hint = state.store.load_artifact(record.digest)
        if data is None:
            return _error(404, "artifact no longer stored")
        return submit(data, hint, scenario_raw, parent=analysis_id)

    @app.get("/analyses/{analysis_id}/events")
    def stream_events(analysis_id: str, after: int = -1):
        record = state.records.get(analysis_id)
        if record is None:
            return _error(404, "unknown analysis id")

        def generate():
            last = after
            live = record.live_log
            if record.state in (STATE_DONE, STATE_FAILED) or live is None:
                text = record.events_text
                if not text and record.state not in (STATE_DONE, STATE_FAILED):
                    # queued with no log yet: wait for the worker briefly
                    deadline = time.time() + 30
                    while time.time() < deadline:
                        live = record.live_log
                        if live is not None or record.state in (
                            STATE_DONE, STATE_FAILED
                        ):
                            break
                        time.sleep(0.05)
                    text = record.events_text
                if live is None:
                    for line in text.splitlines():
                        if line and int(line.split("\t", 1)[0]) > after:
                            yield line + "\n"
                    return
            while True:
                for event in live.snapshot(last):
                    last = event.seq
                    yield event.to_line() + "\n"
                if live.closed and len(live) <= last + 1:
                    return
                live.wait_for_more(last, timeout=0.25)

        return StreamingResponse(generate(), media_type="text/plain")

    @app.get("/analyses/{analysis_id}/files")
    @app.get("/analyses/{analysis_id}/files/{path:path}")
    def get_file(analysis_id: str, path: str = ""):
        record = state.records.get(analysis_id)
        if record is None:
            return _error(404, "unknown analysis id")
        artifact = state.get_artifact(record.digest)
        if artifact is None:
            return _error(404, "artifact no longer stored")
        if path in ("", "/"):
            return JSONResponse([f.path for f in artifact.files])
        entry = artifact.get(path)
        if entry is None:
            prefix = path.rstrip("/") + "/"
            listing = [f.path for f in artifact.files if f.path.startswith(prefix)]
            if listing:
                return JSONResponse(listing)
            return _error(404, "unknown path")
        media = mimetypes.guess_type(path)[0] or "application/octet-stream"
        return Response(content=entry.data, media_type=media)

    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
