"""HTTP service wrapping the experiment runner."""

from .app import app, create_app
from .schemas import Health, JobStatus, RunRequest, RunResponse

__all__ = ["Health", "JobStatus", "RunRequest", "RunResponse", "app", "create_app"]
