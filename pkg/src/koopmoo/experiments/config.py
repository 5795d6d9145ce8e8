"""Experiment configuration with desk and paper presets."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

Scale = Literal["desk", "paper"]
Experiment = Literal["analytic-checks", "voter-moo", "epidemic-moo"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Region(_Strict):
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    iterations: int = Field(12, ge=1)
    samples_per_box: int = Field(20, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if len(self.lower) != len(self.upper) or any(a >= b for a, b in zip(self.lower, self.upper)):
            raise ValueError("region needs lower < upper in every coordinate")
        return self


class Validation(_Strict):
    test_points: int = Field(100, ge=0)
    ensemble: int = Field(100, ge=2)
    confidence: float = Field(0.999, gt=0, lt=1)


class VoterSettings(_Strict):
    N: int = Field(500, ge=2)
    gamma12: float = 1.0
    gamma21: float = 2.0
    gamma12_prime: float = 0.1
    gamma21_prime: float = 0.1
    x0: float = Field(0.5, ge=0, le=1)
    degree: int = Field(3, ge=1)
    states: int = Field(100, ge=1)
    mc_runs: int = Field(100, ge=2)
    tau: float = Field(0.05, gt=0)
    ridge: float = Field(0.0, ge=0)
    learning_controls: tuple[tuple[float, float], ...] = ((0, 0), (1, 0), (0, 1), (1, 1))
    t_eval: float = Field(10.0, gt=0)
    dt: float = Field(0.01, gt=0)
    evaluation: Literal["mean-field", "ensemble"] = "mean-field"
    regions: tuple[Region, ...] = (
        Region(lower=(-1, -2), upper=(5, 5), iterations=12),
        Region(lower=(0.25, -0.75), upper=(0.75, -0.25), iterations=12),
    )
    validate_region: int = 1
    validation: Validation = Validation()
    trajectory_controls: tuple[tuple[float, float], ...] = ((0, 0), (0.5, -0.5), (1, 1))
    trajectory_runs: int = Field(1000, ge=2)


class EpidemicSettings(_Strict):
    N: int = Field(1045, ge=2)
    beta: float = Field(0.0186, ge=0)
    gamma: float = Field(1.0 / 168.0, ge=0)
    child_fraction: float = Field(0.2, gt=0, lt=1)
    contact: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.8), (0.8, 1.6))
    exponent: float = 2.0
    infected0: tuple[int, int] = (3, 2)
    T: float = Field(1176.0, gt=0)
    dt: float = Field(1.0, gt=0)
    subsample: int = Field(24, ge=1)
    grid: int = Field(15, ge=2)
    lower: tuple[float, float] = (0.0, 0.0)
    upper: tuple[float, float] = (1.0, 0.8)
    mc_runs: int = Field(1000, ge=2)
    tau_steps: int = Field(1, ge=1)
    degree: int = Field(4, ge=1)
    ridge: float = Field(0.0, ge=0)
    i_max: float = 0.005
    u_w_max: float = 0.81
    weight: float = 10.0
    objective_dt: float = Field(4.0, gt=0)
    iterations: int = Field(14, ge=1)
    samples_per_box: int = Field(10, ge=1)
    reduced_model: Literal["six", "four"] = "six"
    rmse_runs: int = Field(200, ge=2)
    validation: Validation = Validation(test_points=20, ensemble=100)


class ExperimentConfig(_Strict):
    experiment: Experiment
    seed: int = 0
    scale: Scale = "desk"
    voter: VoterSettings = VoterSettings()
    epidemic: EpidemicSettings = EpidemicSettings()

    def to_json(self) -> str:
        return self.model_dump_json(indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.model_validate_json(text)

    def digest(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def default_config(experiment: Experiment, scale: Scale = "desk", seed: int = 0) -> ExperimentConfig:
    """Presets; ``paper`` restores the full Monte Carlo counts."""
    cfg = ExperimentConfig(experiment=experiment, seed=seed, scale=scale)
    if scale == "paper":
        ep = cfg.epidemic.model_copy(update={
            "mc_runs": 1000,
            "rmse_runs": 1000,
            "samples_per_box": 20,
            "validation": Validation(test_points=50, ensemble=1000),
        })
        cfg = cfg.model_copy(update={"epidemic": ep})
    return cfg


def load_config(path: str | Path | None, experiment: Experiment, scale: Scale | None = None, seed: int | None = None) -> ExperimentConfig:
    """Read a JSON config (or the preset) and apply command-line overrides."""
    if path is None:
        cfg = default_config(experiment, scale or "desk", seed or 0)
    else:
        data = json.loads(Path(path).read_text())
        data.setdefault("experiment", experiment)
        if scale is not None and data.get("scale") != scale:
            base = default_config(experiment, scale).model_dump(mode="json")
            for key, val in data.items():
                if isinstance(val, dict) and isinstance(base.get(key), dict):
                    base[key].update(val)
                else:
                    base[key] = val
            base["scale"] = scale
            data = base
        cfg = ExperimentConfig.model_validate(data)
    update = {"experiment": experiment}
    if seed is not None:
        update["seed"] = seed
    return ExperimentConfig.model_validate({**cfg.model_dump(mode="json"), **update})
