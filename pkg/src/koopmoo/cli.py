"""Command-line client: every verb is a request to the HTTP service.

Without ``--server`` the service runs in-process.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import httpx

from .experiments.runner import VERBS

SUMMARY_KEYS = ("passed", "validation", "moo", "regions", "rmse", "trajectory_rmse", "summary", "front_points", "leaves")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="koopmoo", description="Koopman-generator surrogates for multi-objective control of agent-based models.")
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", choices=("desk", "paper"))
    p.add_argument("--out", default="out", help="run directory (default: out)")
    p.add_argument("--server", help="base URL of a running service, e.g. http://127.0.0.1:8000")
    p.add_argument("--no-resume", action="store_true", help="ignore checkpoints in the run directory")
    p.add_argument("--full", action="store_true", help="print the whole report")
    return p


def _client(server):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _brief(report: dict) -> dict:
    out = {}
    for k in SUMMARY_KEYS:
        if k not in report:
            continue
        v = report[k]
        if k == "validation" and isinstance(v, dict):
            v = v.get("summary", v)
        out[k] = v
    if "checks" in report:
        out["checks"] = {c["name"]: c["passed"] for c in report["checks"]}
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    body = {"verb": args.verb, "out": args.out, "resume": not args.no_resume}
    if args.config:
        body["config"] = args.config
    if args.seed is not None:
        body["seed"] = args.seed
    if args.scale:
        body["scale"] = args.scale
    with _client(args.server) as client:
        r = client.post("/run", json=body)
    if r.status_code != 200:
        print(f"error {r.status_code}: {r.json().get('detail', r.text)}", file=sys.stderr)
        return 2
    res = r.json()
    report = res["report"]
    print(json.dumps(report if args.full else _brief(report), indent=1))
    print(f"wrote {len(res['files'])} files to {res['out']}", file=sys.stderr)
    return 1 if report.get("passed") is False else 0


if __name__ == "__main__":
    sys.exit(main())
