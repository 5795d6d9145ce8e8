"""Output directory layout and resumable phase checkpoints."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .. import _jsonio
from ..moo import BoxTree, FrontPoint, write_covering_csv, write_front_csv
from ..surrogate import write_trajectory_csv


class RunDirectory:
    """Writes the exported files of one run under ``root``."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "trajectories").mkdir(exist_ok=True)

    def path(self, name: str) -> Path:
        return self.root / name

    def covering(self, tree: BoxTree, name: str = "covering.csv") -> None:
        write_covering_csv(tree, self.path(name))

    def front(self, front: list[FrontPoint], name: str = "front.csv", names=None, objective_names=None) -> None:
        write_front_csv(front, self.path(name), names, objective_names)

    def trajectory(self, name: str, times, states, names=None) -> None:
        write_trajectory_csv(self.root / "trajectories" / f"{name}.csv", times, states, names)

    def json(self, name: str, obj) -> None:
        _jsonio.dump(obj, self.path(name))

    def rmse(self, rows: list[dict], name: str = "rmse.csv") -> None:
        keys = list(rows[0]) if rows else ["model", "control", "rmse"]
        with open(self.path(name), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for r in rows:
                w.writerow({k: ("%.17g" % v if isinstance(v, float) else v) for k, v in r.items()})


class Checkpoints:
    """Phase results keyed by a config digest; stale or foreign files are ignored."""

    def __init__(self, root, digest: str, enabled: bool = True):
        self.dir = Path(root) / "checkpoints"
        self.digest = digest
        self.enabled = enabled
        if enabled:
            self.dir.mkdir(parents=True, exist_ok=True)

    def _files(self, phase: str):
        return self.dir / f"{phase}.npz", self.dir / f"{phase}.json"

    def load(self, phase: str):
        if not self.enabled:
            return None
        arrays, meta = self._files(phase)
        if not arrays.exists() or not meta.exists():
            return None
        info = json.loads(meta.read_text())
        if info.get("digest") != self.digest:
            return None
        with np.load(arrays) as data:
            return {k: data[k] for k in data.files}

    def save(self, phase: str, **arrays) -> None:
        if not self.enabled:
            return
        npz, meta = self._files(phase)
        np.savez(npz, **arrays)
        meta.write_text(json.dumps({"digest": self.digest, "phase": phase, "keys": sorted(arrays)}))
