"""Request and response bodies of the HTTP service."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field

Verb = Literal["analytic-checks", "voter-moo", "epidemic-moo", "identify", "validate", "export-front"]


class RunRequest(BaseModel):
    verb: Verb
    out: str = Field(..., description="run directory on the server's filesystem")
    config: dict[str, Any] | str | None = Field(None, description="config mapping or path to a JSON file")
    seed: int | None = None
    scale: Literal["desk", "paper"] | None = None
    resume: bool = True


class RunResponse(BaseModel):
    verb: Verb
    out: str
    files: list[str]
    report: dict[str, Any]


class JobStatus(BaseModel):
    id: str
    verb: Verb
    state: Literal["queued", "running", "done", "failed"]
    result: RunResponse | None = None
    error: str | None = None


class Health(BaseModel):
    status: str = "ok"
    version: str
    verbs: list[str]
