import filecmp
import json

import numpy as np
import pytest
from pydantic import ValidationError

from koopmoo.errors import ConfigurationError
from koopmoo.experiments import ExperimentConfig, default_config, execute, load_config, resolve_config
from koopmoo.experiments.outputs import Checkpoints
from koopmoo.experiments.runner import read_covering, read_front
from koopmoo.experiments.validation import classify, dominated_by_front, z_value
from koopmoo.moo import BoxTree

TINY_VOTER = {
    "voter": {
        "states": 30,
        "mc_runs": 50,
        "regions": [
            {"lower": [-1, -2], "upper": [5, 5], "iterations": 6, "samples_per_box": 4},
            {"lower": [0.25, -0.75], "upper": [0.75, -0.25], "iterations": 6, "samples_per_box": 4},
        ],
        "validation": {"test_points": 8, "ensemble": 20},
        "trajectory_runs": 20,
    }
}
TINY_EPIDEMIC = {
    "epidemic": {
        "grid": 3,
        "mc_runs": 50,
        "iterations": 4,
        "samples_per_box": 3,
        "rmse_runs": 10,
        "validation": {"test_points": 4, "ensemble": 10},
    }
}


# config


def test_presets():
    desk = default_config("voter-moo")
    paper = default_config("epidemic-moo", "paper", seed=3)
    assert desk.scale == "desk" and desk.seed == 0
    assert paper.epidemic.mc_runs == 1000 and paper.epidemic.validation.ensemble == 1000
    assert paper.seed == 3


def test_config_round_trip_and_digest():
    cfg = default_config("epidemic-moo", seed=7)
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg and again.digest() == cfg.digest()
    assert cfg.model_copy(update={"seed": 8}).digest() != cfg.digest()


def test_config_rejects_bad_values():
    with pytest.raises(ValidationError):
        ExperimentConfig(experiment="voter-moo", colour="red")
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"experiment": "voter-moo", "voter": {"regions": [{"lower": [1, 0], "upper": [0, 1]}]}})
    with pytest.raises(ValidationError):
        ExperimentConfig(experiment="nothing")


def test_load_config_layers_file_over_preset(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"epidemic": {"iterations": 3}}))
    cfg = load_config(path, "epidemic-moo", scale="paper", seed=5)
    assert cfg.epidemic.iterations == 3
    assert cfg.epidemic.mc_runs == 1000
    assert cfg.seed == 5 and cfg.scale == "paper"
    assert load_config(None, "voter-moo", seed=2) == default_config("voter-moo", seed=2)


def test_resolve_config(tmp_path):
    cfg = resolve_config("voter-moo", dict(TINY_VOTER), seed=4)
    assert cfg.experiment == "voter-moo" and cfg.seed == 4 and cfg.voter.states == 30
    assert resolve_config("identify").experiment == "voter-moo"
    assert resolve_config("identify", {"experiment": "epidemic-moo"}).experiment == "epidemic-moo"
    with pytest.raises(ConfigurationError):
        resolve_config("fly")
    with pytest.raises(ConfigurationError):
        resolve_config("voter-moo", dict(TINY_VOTER), scale="paper")
    (tmp_path / "config.json").write_text(default_config("epidemic-moo", seed=9).to_json())
    saved = resolve_config("validate", out=tmp_path)
    assert saved.experiment == "epidemic-moo" and saved.seed == 9


# validation helpers


def test_z_value():
    assert z_value(0.999) == pytest.approx(3.2905267314918945, rel=1e-12)
    assert z_value(0.95) == pytest.approx(1.959963984540054, rel=1e-12)


def test_ci_inflated_dominance():
    front = [[1.0, 1.0]]
    assert dominated_by_front(front, [1.2, 1.5])
    assert not dominated_by_front(front, [1.2, 1.5], halfwidth=[0.3, 0.0])
    assert dominated_by_front(front, [1.2, 1.5], halfwidth=[0.1, 0.1])
    assert not dominated_by_front(np.empty((0, 2)), [5.0, 5.0])
    assert not dominated_by_front(front, [1.0, 1.0])


def test_classify():
    tree = BoxTree([0, 0], [1, 1])
    tree.subdivide()
    tree.keep([True, False])  # only the left half [0, 0.5] x [0, 1] is covered
    U = np.array([[0.25, 0.5], [0.75, 0.5]])
    abm = np.array([[1.0, 1.0], [2.0, 2.0]])
    half = np.array([[0.1, 0.1], [0.5, 0.5]])
    rep = classify(tree, [[1.0, 1.0]], U, abm, half, abm, 0.999)
    assert [p.covered for p in rep.points] == [True, False]
    assert rep.inside_ok()
    s = rep.summary()
    assert s["inside"] == 1 and s["outside"] == 1
    assert s["outside_dominated_fraction"] == 1.0 and s["outside_dominated_fraction_ci"] == 1.0


# checkpoints


def test_checkpoints(tmp_path):
    ck = Checkpoints(tmp_path, "abc")
    ck.save("phase", x=np.arange(3.0))
    assert np.array_equal(ck.load("phase")["x"], np.arange(3.0))
    assert Checkpoints(tmp_path, "other").load("phase") is None
    assert Checkpoints(tmp_path, "abc", enabled=False).load("phase") is None
    assert ck.load("missing") is None


# runner


@pytest.fixture(scope="module")
def voter_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("voter")
    cfg = resolve_config("voter-moo", dict(TINY_VOTER))
    return out, cfg, execute("voter-moo", cfg, out)


def test_voter_run_outputs(voter_run):
    out, cfg, res = voter_run
    for name in ("covering.csv", "front.csv", "report.json", "rmse.csv", "model.json", "config.json"):
        assert name in res["files"]
    assert any(f.startswith("trajectories/") for f in res["files"])
    assert ExperimentConfig.from_json((out / "config.json").read_text()) == cfg
    report = json.loads((out / "report.json").read_text())
    assert report["experiment"] == "voter-moo"
    tree = read_covering(out / "covering.csv", (0.25, -0.75), (0.75, -0.25))
    assert len(tree) > 0 and tree.depth == 6
    front = read_front(out / "front.csv", 2)
    F = np.array([p.objectives for p in front])
    assert np.all(np.diff(F[:, 0]) >= 0)


def test_voter_rerun_is_byte_identical(voter_run, tmp_path):
    out, cfg, res = voter_run
    again = execute("voter-moo", cfg, tmp_path, resume=False)
    assert again["files"] == res["files"]
    for name in res["files"]:
        assert filecmp.cmp(out / name, tmp_path / name, shallow=False), name


def test_resume_uses_checkpoints(voter_run):
    out, cfg, res = voter_run
    before = (out / "front.csv").read_bytes()
    execute("voter-moo", cfg, out, resume=True)
    assert (out / "front.csv").read_bytes() == before


def test_export_front_reproduces_front(voter_run, tmp_path):
    out, cfg, _ = voter_run
    for name in ("config.json", "covering.csv", "model.json"):
        (tmp_path / name).write_bytes((out / name).read_bytes())
    res = execute("export-front", resolve_config("export-front", out=tmp_path), tmp_path)
    assert (tmp_path / "front.csv").read_bytes() == (out / "front.csv").read_bytes()
    assert res["report"]["leaves"] > 0


def test_identify_and_validate(voter_run, tmp_path):
    out, cfg, _ = voter_run
    res = execute("identify", cfg, tmp_path)
    assert (tmp_path / "model.json").read_bytes() == (out / "model.json").read_bytes()
    assert len(res["report"]["drift_base"]) == 4
    for name in ("covering.csv", "front.csv"):
        (tmp_path / name).write_bytes((out / name).read_bytes())
    res = execute("validate", resolve_config("validate", out=tmp_path), tmp_path)
    assert res["report"]["summary"]["test_points"] == 8
    assert "validation.json" in res["files"]


def test_validate_without_run_fails(tmp_path):
    with pytest.raises(FileNotFoundError):
        execute("validate", resolve_config("validate", dict(TINY_VOTER)), tmp_path)


def test_tiny_epidemic_run(tmp_path):
    cfg = resolve_config("epidemic-moo", dict(TINY_EPIDEMIC))
    res = execute("epidemic-moo", cfg, tmp_path)
    for name in ("covering.csv", "front.csv", "report.json", "rmse.csv", "model.json", "interpolation.json"):
        assert name in res["files"]
    rows = (tmp_path / "rmse.csv").read_text().splitlines()
    assert rows[0].split(",")[:2] == ["model", "control"]
    assert len(rows) == 1 + 4 * 4
    json.dumps(res["report"], allow_nan=False)
