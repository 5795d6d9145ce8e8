"""FastAPI application: synchronous runs and background jobs over the verb runner."""

from __future__ import annotations

import threading
import uuid
from importlib.metadata import PackageNotFoundError, version

from fastapi import FastAPI, HTTPException

from ..experiments.runner import VERBS, execute, resolve_config
from .schemas import Health, JobStatus, RunRequest, RunResponse

try:
    VERSION = version("artifact")
except PackageNotFoundError:
    VERSION = "0.0.0"


def _run(req: RunRequest) -> RunResponse:
    cfg = resolve_config(req.verb, req.config, req.seed, req.scale, req.out)
    return RunResponse(**execute(req.verb, cfg, req.out, req.resume))


def create_app() -> FastAPI:
    app = FastAPI(title="koopmoo", version=VERSION)
    jobs: dict[str, JobStatus] = {}
    lock = threading.Lock()
    # one CPU-bound run at a time; jobs queue behind each other
    busy = threading.Lock()

    @app.get("/health", response_model=Health)
    def health():
        return Health(version=VERSION, verbs=list(VERBS))

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest):
        try:
            with busy:
                return _run(req)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        except FileNotFoundError as exc:
            raise HTTPException(404, str(exc)) from exc

    def work(job_id: str, req: RunRequest):
        with busy:
            with lock:
                jobs[job_id] = jobs[job_id].model_copy(update={"state": "running"})
            try:
                res = _run(req)
                update = {"state": "done", "result": res}
            except Exception as exc:  # reported through the job record
                update = {"state": "failed", "error": f"{type(exc).__name__}: {exc}"}
            with lock:
                jobs[job_id] = jobs[job_id].model_copy(update=update)

    @app.post("/jobs", response_model=JobStatus, status_code=202)
    def submit(req: RunRequest):
        job_id = uuid.uuid4().hex
        status = JobStatus(id=job_id, verb=req.verb, state="queued")
        with lock:
            jobs[job_id] = status
        threading.Thread(target=work, args=(job_id, req), daemon=True).start()
        return status

    @app.get("/jobs/{job_id}", response_model=JobStatus)
    def job(job_id: str):
        with lock:
            if job_id not in jobs:
                raise HTTPException(404, f"unknown job {job_id}")
            return jobs[job_id]

    return app


app = create_app()
