"""Verb dispatch shared by the command line and the HTTP service."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .. import _jsonio
from ..control_models import AffineGeneratorFamily, AugmentedModel
from ..errors import ConfigurationError
from ..moo import BoxTree, FrontPoint, pareto_front, read_front_csv
from . import epidemic, voter
from .analytic import run_analytic_checks
from .config import ExperimentConfig, load_config
from .outputs import RunDirectory

VERBS = ("analytic-checks", "voter-moo", "epidemic-moo", "identify", "validate", "export-front")
CONFIG_FILE = "config.json"


def resolve_config(verb: str, config=None, seed: int | None = None, scale: str | None = None, out=None) -> ExperimentConfig:
    """Config from an object, a mapping, a JSON path, the run directory, or the presets.

    ``seed`` and ``scale`` override whatever the source says; explicit file
    settings are layered over the preset of the requested scale.
    """
    if verb not in VERBS:
        raise ConfigurationError(f"unknown verb {verb!r}")
    saved = Path(out) / CONFIG_FILE if out is not None else None
    if config is None and verb in ("validate", "export-front") and saved is not None and saved.exists():
        config = saved
    if isinstance(config, ExperimentConfig):
        config = config.model_dump(mode="json")
    experiment = verb if verb in ("analytic-checks", "voter-moo", "epidemic-moo") else None
    if isinstance(config, dict):
        experiment = experiment or config.get("experiment", "voter-moo")
        cfg = ExperimentConfig.model_validate({**config, "experiment": experiment})
        if scale is not None and scale != cfg.scale:
            raise ConfigurationError("pass scale inside the config mapping")
        return cfg.model_copy(update={"seed": seed}) if seed is not None else cfg
    if config is not None:
        experiment = experiment or json.loads(Path(config).read_text()).get("experiment", "voter-moo")
    return load_config(config, experiment or "voter-moo", scale, seed)


def _plain(obj):
    """JSON-safe copy; NaN and infinities become the strings "NaN", "Infinity", "-Infinity"."""
    return json.loads(_jsonio.dumps(obj), parse_constant=str)


def _files(out) -> list[str]:
    root = Path(out)
    return sorted(str(p.relative_to(root)) for p in root.rglob("*") if p.is_file() and "checkpoints" not in p.parts)


def _region(cfg: ExperimentConfig):
    if cfg.experiment == "epidemic-moo":
        s = cfg.epidemic
        return s.lower, s.upper, ["u_s", "u_w"], ["infection", "economic"]
    r = cfg.voter.regions[cfg.voter.validate_region]
    return r.lower, r.upper, ["u_push", "u_pull"], ["share", "energy"]


def read_covering(path, lower, upper) -> BoxTree:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))
    n = sum(h.startswith("c") for h in header)
    depth = int(data[0, -1]) if len(data) else 0
    return BoxTree.from_centers(lower, upper, depth, data[:, :n])


def read_front(path, n_decision: int) -> list[FrontPoint]:
    Y, F = read_front_csv(path, n_decision)
    return [FrontPoint(y, f, False) for y, f in zip(Y, F)]


def load_models(cfg: ExperimentConfig, out):
    """Surrogates saved by a previous run in ``out``."""
    root = Path(out)
    data = _jsonio.load(root / "model.json")
    if cfg.experiment == "epidemic-moo":
        interp = _jsonio.load(root / "interpolation.json")
        return epidemic.EpidemicModels(
            AugmentedModel.from_dict(data["augmented-6"]),
            AugmentedModel.from_dict(data["augmented-4"]),
            AffineGeneratorFamily.from_dict(interp["interpolated-6"]),
            AffineGeneratorFamily.from_dict(interp["interpolated-4"]),
        )
    return AffineGeneratorFamily.from_dict(data)


def _identify(cfg: ExperimentConfig, run: RunDirectory) -> dict:
    if cfg.experiment == "epidemic-moo":
        m = epidemic.learn_epidemic_models(cfg)
        run.json("model.json", {"augmented-6": m.six.to_dict(), "augmented-4": m.four.to_dict()})
        run.json("interpolation.json", {"interpolated-6": m.interp_six.to_dict(), "interpolated-4": m.interp_four.to_dict()})
        sizes = {"augmented-6": m.six.dictionary.size, "augmented-4": m.four.dictionary.size}
        return {"experiment": "identify", "target": cfg.experiment, "seed": cfg.seed, "dictionary_sizes": sizes}
    fam = voter.learn_voter_surrogate(cfg)
    run.json("model.json", fam.to_dict())
    base, channels = fam.sde_parts()
    return {
        "experiment": "identify",
        "target": cfg.experiment,
        "seed": cfg.seed,
        "labels": fam.dictionary.labels(["c"]),
        "drift_base": base.drift[:, 0],
        "drift_channels": [c.drift[:, 0] for c in channels],
        "diffusion_base": base.diffusion[0, 0],
    }


def _validate(cfg: ExperimentConfig, run: RunDirectory) -> dict:
    lower, upper, names, _ = _region(cfg)
    tree = read_covering(run.path("covering.csv"), lower, upper)
    front = read_front(run.path("front.csv"), len(names))
    models = load_models(cfg, run.root)
    if cfg.experiment == "epidemic-moo":
        report, jensen = epidemic.validate_epidemic(cfg, models, tree, front)
        result = {"validation": report.to_dict(), "abm_jensen_gap_max": jensen}
    else:
        result = {"validation": voter.validate_voter(cfg, models, tree, front).to_dict()}
    run.json("validation.json", result)
    return {"experiment": "validate", "target": cfg.experiment, "seed": cfg.seed, "summary": result["validation"]["summary"]}


def _export_front(cfg: ExperimentConfig, run: RunDirectory) -> dict:
    lower, upper, names, objective_names = _region(cfg)
    tree = read_covering(run.path("covering.csv"), lower, upper)
    models = load_models(cfg, run.root)
    ev = epidemic.epidemic_evaluator(cfg, models) if cfg.experiment == "epidemic-moo" else voter.voter_evaluator(cfg, models)
    front = pareto_front(tree, ev)
    run.front(front, names=names, objective_names=objective_names)
    good = [p for p in front if not p.failed]
    return {"experiment": "export-front", "target": cfg.experiment, "leaves": len(tree), "front_points": len(good), "failed": len(front) - len(good)}


def execute(verb: str, cfg: ExperimentConfig, out, resume: bool = True) -> dict:
    """Run one verb, write its files under ``out`` and return the report."""
    run = RunDirectory(out)
    if verb not in ("validate", "export-front"):
        run.path(CONFIG_FILE).write_text(cfg.to_json())
    if verb == "analytic-checks":
        report = run_analytic_checks(cfg.seed)
        run.json("report.json", report)
    elif verb == "voter-moo":
        report = voter.run_voter_moo(cfg, out, resume).report
    elif verb == "epidemic-moo":
        report = epidemic.run_epidemic_moo(cfg, out, resume).report
    elif verb == "identify":
        report = _identify(cfg, run)
        run.json("report.json", report)
    elif verb == "validate":
        report = _validate(cfg, run)
    elif verb == "export-front":
        report = _export_front(cfg, run)
    else:
        raise ConfigurationError(f"unknown verb {verb!r}")
    return {"verb": verb, "out": str(Path(out)), "files": _files(out), "report": _plain(report)}
