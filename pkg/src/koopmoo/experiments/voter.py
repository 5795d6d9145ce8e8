"""Voter-model pipeline: learn an affine generator family, optimize, validate."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..abm import VoterParams, VoterSimulator, km_batch
from ..control_models import AffineGeneratorFamily, learn_affine_family
from ..dictionary import monomials
from ..errors import ExtrapolationWarning, RepresentabilityWarning
from ..moo import BoxTree, ParetoArchive, pareto_front, run_summary, sampling_algorithm
from ..surrogate import control_energy, mean_field, coefficient_tables, objective_evaluator, trajectory_rmse, voter_objectives
from .config import ExperimentConfig, VoterSettings
from .outputs import Checkpoints, RunDirectory
from .validation import ValidationReport, classify, z_value

PHASE_LEARN, PHASE_MOO, PHASE_VALIDATE, PHASE_TRAJ = 1, 2, 3, 4


def _seed(cfg: ExperimentConfig, *keys) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.seed, *keys])


def voter_params(s: VoterSettings) -> VoterParams:
    return VoterParams(s.N, s.gamma12, s.gamma21, s.gamma12_prime, s.gamma21_prime)


def training_states(s: VoterSettings, seed) -> np.ndarray:
    """Uniform fractions in ``[0, 1]`` snapped to whole agent counts."""
    c = np.random.default_rng(seed).uniform(0.0, 1.0, s.states)
    return (np.rint(c * s.N) / s.N)[:, None]


def sample_voter(cfg: ExperimentConfig):
    """Kramers-Moyal drift/diffusion at every learning control: ``X, B (c, m, 1), A (c, m, 1, 1)``."""
    s = cfg.voter
    sim = VoterSimulator(voter_params(s))
    X = training_states(s, _seed(cfg, PHASE_LEARN, 0))
    Bs, As = [], []
    for k, u in enumerate(np.asarray(s.learning_controls, dtype=float)):
        b, a, _, _ = km_batch(sim, X, np.tile(u, (len(X), 1)), s.tau, s.mc_runs, _seed(cfg, PHASE_LEARN, 1, k))
        Bs.append(b)
        As.append(a)
    return X, np.array(Bs), np.array(As)


def fit_voter_family(cfg: ExperimentConfig, X, B, A) -> AffineGeneratorFamily:
    s = cfg.voter
    d = monomials(1, s.degree)
    controls = np.asarray(s.learning_controls, dtype=float)
    lookup = {tuple(u): k for k, u in enumerate(controls)}
    box = np.array([r.lower for r in s.regions] + [r.upper for r in s.regions])
    lower, upper = box.min(axis=0), box.max(axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RepresentabilityWarning)
        return learn_affine_family(d, lambda u: (X, B[lookup[tuple(u)]], A[lookup[tuple(u)]]), controls, s.ridge, lower, upper)


def learn_voter_surrogate(cfg: ExperimentConfig, checkpoints: Checkpoints | None = None) -> AffineGeneratorFamily:
    data = checkpoints.load("voter-training") if checkpoints else None
    if data is None:
        X, B, A = sample_voter(cfg)
        if checkpoints:
            checkpoints.save("voter-training", X=X, B=B, A=A)
    else:
        X, B, A = data["X"], data["B"], data["A"]
    return fit_voter_family(cfg, X, B, A)


def voter_evaluator(cfg: ExperimentConfig, family):
    s = cfg.voter
    return objective_evaluator(voter_objectives(s.t_eval, s.dt), family, [s.x0], s.evaluation, seed=cfg.seed)


def abm_share(cfg: ExperimentConfig, U, n: int, seed):
    """ABM estimate of the share objective with normal-approximation halfwidths."""
    s = cfg.voter
    sim = VoterSimulator(voter_params(s))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    end = sim(np.full((len(U), 1), s.x0), U, s.t_eval, n, np.random.default_rng(seed))[..., 0]
    z = z_value(s.validation.confidence)
    return end.mean(axis=1), z * end.std(axis=1, ddof=1) / np.sqrt(n)


def validate_voter(cfg: ExperimentConfig, family, tree: BoxTree, front) -> ValidationReport:
    s = cfg.voter
    v = s.validation
    region = s.regions[s.validate_region]
    rng = np.random.default_rng(_seed(cfg, PHASE_VALIDATE, 0))
    U = rng.uniform(region.lower, region.upper, (v.test_points, len(region.lower)))
    mean, half = abm_share(cfg, U, v.ensemble, _seed(cfg, PHASE_VALIDATE, 1))
    abm_F = np.column_stack([mean, control_energy(U)])
    halfwidths = np.column_stack([half, np.zeros(len(U))])
    surrogate_F = voter_evaluator(cfg, family)(U)
    front_F = np.array([p.objectives for p in front if not p.failed])
    return classify(tree, front_F, U, abm_F, halfwidths, surrogate_F, v.confidence)


@dataclass
class VoterResult:
    family: AffineGeneratorFamily
    trees: list
    archives: list
    fronts: list
    validation: ValidationReport | None
    report: dict = field(default_factory=dict)
    rmse: list = field(default_factory=list)


def _run_region(cfg, k, region, evaluator, checkpoints):
    key = f"voter-moo-{k}"
    data = checkpoints.load(key) if checkpoints else None
    if data is not None:
        tree = BoxTree.restore(region.lower, region.upper, int(data["depth"]), data["cells"], data["history"])
        return tree, ParetoArchive.restore(data["X"], data["F"]), None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        tree, archive, stats = sampling_algorithm(
            region.lower, region.upper, evaluator, region.iterations, region.samples_per_box, seed=int(_seed(cfg, PHASE_MOO, k).generate_state(1)[0])
        )
    if checkpoints:
        checkpoints.save(key, depth=tree.depth, cells=tree.cells, history=np.array(tree.history), X=archive.X, F=archive.F)
    return tree, archive, stats


def step_convergence(cfg: ExperimentConfig, family, U) -> float:
    """Largest change of the share objective when the integrator step is halved."""
    s = cfg.voter
    d, dr, _ = coefficient_tables(family, U)
    _, a = mean_field(d, dr, [s.x0], s.t_eval, s.dt)
    _, b = mean_field(d, dr, [s.x0], s.t_eval, s.dt / 2)
    return float(np.max(np.abs(a[-1, :, 0] - b[-1, :, 0])))


def voter_trajectories(cfg: ExperimentConfig, family, out: RunDirectory | None):
    """Surrogate mean-field against ABM ensemble means at the configured controls."""
    s = cfg.voter
    sim = VoterSimulator(voter_params(s))
    times = np.linspace(0.0, s.t_eval, 101)
    rows = []
    for k, u in enumerate(np.asarray(s.trajectory_controls, dtype=float)):
        abm = sim.trajectories([s.x0], u, times, s.trajectory_runs, np.random.default_rng(_seed(cfg, PHASE_TRAJ, k)))
        ref = abm.mean(axis=1)
        d, dr, _ = coefficient_tables(family, u[None])
        t_mf, mf = mean_field(d, dr, [s.x0], s.t_eval, s.dt)
        rows.append({"model": "affine-family", "control": f"({u[0]:g}, {u[1]:g})", "rmse": trajectory_rmse((times, ref), (t_mf, mf[:, 0]))})
        if out is not None:
            out.trajectory(f"voter_abm_{k}", times, ref, ["c"])
            out.trajectory(f"voter_surrogate_{k}", times, np.interp(times, t_mf, mf[:, 0, 0])[:, None], ["c"])
    return rows


def run_voter_moo(cfg: ExperimentConfig, out=None, resume: bool = True, validate: bool = True) -> VoterResult:
    """Learn, optimize over every configured region, validate the chosen one, export."""
    s = cfg.voter
    run = RunDirectory(out) if out is not None else None
    checkpoints = Checkpoints(out, cfg.digest(), resume) if out is not None else None
    family = learn_voter_surrogate(cfg, checkpoints)
    evaluator = voter_evaluator(cfg, family)
    trees, archives, fronts, regions = [], [], [], []
    for k, region in enumerate(s.regions):
        tree, archive, stats = _run_region(cfg, k, region, evaluator, checkpoints)
        front = pareto_front(tree, evaluator)
        trees.append(tree)
        archives.append(archive)
        fronts.append(front)
        f1 = np.array([p.objectives[0] for p in front if not p.failed])
        summary = {
            "lower": region.lower,
            "upper": region.upper,
            "leaves": len(tree),
            "iterations": tree.depth,
            "leaf_counts": list(tree.history),
            "archive_size": len(archive),
            "box_width": tree.width,
            "front_points": int(f1.size),
            "front_share_range": [float(f1.min()), float(f1.max())] if f1.size else None,
            "majority_flip_on_front": bool(f1.size and f1.min() <= 0.5 <= f1.max()),
        }
        if stats is not None:
            summary.update({k2: v for k2, v in run_summary(tree, archive, stats).items() if k2 in ("evaluations", "failures")})
        regions.append(summary)
    report = {
        "experiment": "voter-moo",
        "seed": cfg.seed,
        "scale": cfg.scale,
        "config_digest": cfg.digest(),
        "model": {
            "kind": "affine-family",
            "dictionary": family.dictionary.to_dict(),
            "labels": family.dictionary.labels(["c"]),
            "drift_base": family.sde_parts()[0].drift[:, 0],
            "drift_channels": [c.drift[:, 0] for c in family.sde_parts()[1]],
        },
        "regions": regions,
    }
    vk = s.validate_region
    probe = trees[vk].centers()[:50]
    report["integrator_step_halving_max_change"] = step_convergence(cfg, family, probe)
    validation = None
    if validate and s.validation.test_points > 0:
        validation = validate_voter(cfg, family, trees[vk], fronts[vk])
        report["validation"] = validation.to_dict()
    rmse = voter_trajectories(cfg, family, run)
    report["trajectory_rmse"] = rmse
    if run is not None:
        run.json("model.json", family.to_dict())
        for k, (tree, front) in enumerate(zip(trees, fronts)):
            run.covering(tree, f"covering_region{k}.csv")
            run.front(front, f"front_region{k}.csv", ["u_push", "u_pull"], ["share", "energy"])
        run.covering(trees[vk])
        run.front(fronts[vk], names=["u_push", "u_pull"], objective_names=["share", "energy"])
        run.rmse(rmse)
        run.json("report.json", report)
    return VoterResult(family, trees, archives, fronts, validation, report, rmse)
