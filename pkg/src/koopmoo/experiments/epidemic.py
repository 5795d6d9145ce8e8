"""Epidemic pipeline on the two-group SIR stand-in.

Training data are states visited by one ABM realisation per grid control,
taken every ``subsample`` steps; Kramers-Moyal estimates at each
(state, control) pair feed the augmented models.  The interpolation baseline
learns state-only generators at the vertices of the decision box from the
same states.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..abm import SirSimulator, km_moments, two_group_params
from ..control_models import AffineGeneratorFamily, AugmentedModel, assemble_family, learn_augmented
from ..dictionary import monomials
from ..errors import ExtrapolationWarning, RepresentabilityWarning
from ..gedmd import build_matrices, estimate_generator
from ..moo import BoxTree, ParetoArchive, pareto_front, run_summary, sampling_algorithm
from ..surrogate import coefficient_tables, economic_cost, epidemic_objectives, mean_field, objective_evaluator, trajectory_rmse
from .config import EpidemicSettings, ExperimentConfig
from .outputs import Checkpoints, RunDirectory
from .validation import ValidationReport, classify, z_value

PHASE_TRAIN, PHASE_KM, PHASE_MOO, PHASE_VALIDATE, PHASE_RMSE = 11, 12, 13, 14, 15
KM_CHUNK = 250_000  # simulated paths per Kramers-Moyal call
AGGREGATE = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]])
STATE_NAMES = ["S_a", "S_c", "I_a", "I_c"]


def _seed(cfg: ExperimentConfig, *keys) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.seed, *keys])


def sir_params(s: EpidemicSettings):
    return two_group_params(s.N, s.beta, s.gamma, s.child_fraction, s.contact, s.exponent)


def initial_state(s: EpidemicSettings) -> np.ndarray:
    share = np.array([1.0 - s.child_fraction, s.child_fraction])
    i0 = np.asarray(s.infected0, dtype=float) / s.N
    return np.concatenate([share - i0, i0])


def control_grid(s: EpidemicSettings) -> np.ndarray:
    us = np.linspace(s.lower[0], s.upper[0], s.grid)
    uw = np.linspace(s.lower[1], s.upper[1], s.grid)
    return np.array([(a, b) for a in us for b in uw])


def vertices(s: EpidemicSettings) -> np.ndarray:
    (a0, b0), (a1, b1) = s.lower, s.upper
    return np.array([[a0, b0], [a1, b0], [a0, b1], [a1, b1]])


def abm_paths(cfg: ExperimentConfig, U, n: int, seed, times=None):
    """ABM paths for every control row: ``(n_t, P, n, 4)`` on ``times`` (default: every step)."""
    s = cfg.epidemic
    sim = SirSimulator(sir_params(s), dt=s.dt)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    P = len(U)
    steps = int(round(s.T / s.dt))
    grid = np.arange(steps + 1) * s.dt
    times = grid if times is None else np.asarray(times, dtype=float)
    keep = np.rint(times / s.dt).astype(int)
    rng = np.random.default_rng(seed)
    x = np.tile(initial_state(s), (P * n, 1))
    Ur = np.repeat(U, n, axis=0)
    out = np.empty((len(times), P * n, 4))
    slot = 0
    if keep[0] == 0:
        out[0] = x
        slot = 1
    for k in range(1, steps + 1):
        x = sim(x, Ur, s.dt, 1, rng)[:, 0]
        if slot < len(keep) and keep[slot] == k:
            out[slot] = x
            slot += 1
    return times, out.reshape(len(times), P, n, 4)


def training_data(cfg: ExperimentConfig):
    """States along one realisation per grid control: ``X (m, 4)``, ``U (m, 2)``."""
    s = cfg.epidemic
    U = control_grid(s)
    times = np.arange(0.0, s.T, s.subsample * s.dt)
    _, paths = abm_paths(cfg, U, 1, _seed(cfg, PHASE_TRAIN), times)
    X = paths[:, :, 0, :].transpose(1, 0, 2).reshape(-1, 4)
    return X, np.repeat(U, len(times), axis=0)


def km_estimates(cfg: ExperimentConfig, X, U, key: int):
    """Kramers-Moyal drift and diffusion at ``(X, U)`` pairs, chunked to bound memory."""
    s = cfg.epidemic
    sim = SirSimulator(sir_params(s), dt=s.dt)
    tau = s.tau_steps * s.dt
    rng = np.random.default_rng(_seed(cfg, PHASE_KM, key))
    step = max(1, KM_CHUNK // s.mc_runs)
    B = np.empty_like(X)
    A = np.empty(X.shape + (X.shape[1],))
    for lo in range(0, len(X), step):
        sl = slice(lo, lo + step)
        end = sim(X[sl], U[sl], tau, s.mc_runs, rng)
        b, a, _, _ = km_moments(end - X[sl, None, :], tau)
        B[sl], A[sl] = b, a
    return B, A


def aggregate(X, B, A):
    """Map two-group quantities to ``[S, I]``."""
    return X @ AGGREGATE.T, B @ AGGREGATE.T, np.einsum("ij,mjk,lk->mil", AGGREGATE, A, AGGREGATE)


@dataclass
class EpidemicModels:
    six: AugmentedModel
    four: AugmentedModel
    interp_six: AffineGeneratorFamily
    interp_four: AffineGeneratorFamily


def _family(s: EpidemicSettings, X, estimates, degree: int) -> AffineGeneratorFamily:
    d = monomials(X.shape[1], degree)
    gens = []
    for B, A in estimates:
        PsiX, dPsiX = build_matrices(d, X=X, B=B, A=A)
        gens.append(estimate_generator(PsiX, dPsiX, s.ridge, d))
    return assemble_family(vertices(s), gens, d, s.lower, s.upper)


def learn_epidemic_models(cfg: ExperimentConfig, checkpoints: Checkpoints | None = None) -> EpidemicModels:
    s = cfg.epidemic
    data = checkpoints.load("epidemic-training") if checkpoints else None
    if data is None:
        X, U = training_data(cfg)
        B, A = km_estimates(cfg, X, U, 0)
        corner = [km_estimates(cfg, X, np.tile(v, (len(X), 1)), 1 + k) for k, v in enumerate(vertices(s))]
        data = {"X": X, "U": U, "B": B, "A": A}
        for k, (b, a) in enumerate(corner):
            data[f"B{k}"], data[f"A{k}"] = b, a
        if checkpoints:
            checkpoints.save("epidemic-training", **data)
    X, U, B, A = data["X"], data["U"], data["B"], data["A"]
    corner = [(data[f"B{k}"], data[f"A{k}"]) for k in range(4)]
    X4, B4, A4 = aggregate(X, B, A)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RepresentabilityWarning)
        six = learn_augmented(monomials(6, s.degree), X, U, B, A=A, ridge=s.ridge)
        four = learn_augmented(monomials(4, s.degree), X4, U, B4, A=A4, ridge=s.ridge)
        interp_six = _family(s, X, corner, s.degree)
        interp_four = _family(s, X4, [aggregate(X, b, a)[1:] for b, a in corner], s.degree)
    return EpidemicModels(six, four, interp_six, interp_four)


def reduced_trajectory(model, u, x0, T: float, dt: float):
    d, dr, _ = coefficient_tables(model, np.atleast_2d(u))
    times, X = mean_field(d, dr, np.atleast_2d(x0), T, dt)
    return times, X[:, 0]


def rmse_table(cfg: ExperimentConfig, models: EpidemicModels, out: RunDirectory | None = None):
    """Trajectory RMSE of every model against ABM ensemble means at the vertices of R."""
    s = cfg.epidemic
    x0 = initial_state(s)
    times = np.arange(0.0, s.T + 0.5 * s.dt, s.subsample * s.dt)
    V = vertices(s)
    _, paths = abm_paths(cfg, V, s.rmse_runs, _seed(cfg, PHASE_RMSE), times)
    ref = paths.mean(axis=2)  # (n_t, 4 vertices, 4)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        for k, v in enumerate(V):
            label = f"({v[0]:g}, {v[1]:g})"
            ref6 = ref[:, k]
            ref4 = ref6 @ AGGREGATE.T
            runs = {
                "augmented-6": (models.six, x0, ref6),
                "interpolated-6": (models.interp_six, x0, ref6),
                "augmented-4": (models.four, AGGREGATE @ x0, ref4),
                "interpolated-4": (models.interp_four, AGGREGATE @ x0, ref4),
            }
            if out is not None:
                out.trajectory(f"epidemic_abm_{k}", times, ref6, STATE_NAMES)
            for name, (model, start, target) in runs.items():
                t, X = reduced_trajectory(model, v, start, s.T, s.dt)
                err = trajectory_rmse((times, target), (t, X))
                rows.append({"model": name, "control": label, "u_s": float(v[0]), "u_w": float(v[1]), "rmse": err if np.isfinite(err) else float("inf")})
                if out is not None:
                    names = STATE_NAMES if X.shape[1] == 4 else ["S", "I"]
                    out.trajectory(f"epidemic_{name}_{k}", times, np.column_stack([np.interp(times, t, X[:, i]) for i in range(X.shape[1])]), names)
    return rows


def epidemic_evaluator(cfg: ExperimentConfig, models: EpidemicModels):
    s = cfg.epidemic
    if s.reduced_model == "six":
        model, x0, groups = models.six, initial_state(s), 2
    else:
        model, x0, groups = models.four, AGGREGATE @ initial_state(s), 1
    specs = epidemic_objectives(s.T, s.i_max, s.u_w_max, groups, s.objective_dt, s.weight)
    return objective_evaluator(specs, model, x0)


def infection_burden(s: EpidemicSettings, times, paths):
    """Per-path running cost integral for paths ``(n_t, ..., 4)``."""
    i = paths[..., 2] + paths[..., 3]
    return np.trapezoid(i + np.exp(s.weight * (i - s.i_max)), times, axis=0)


def validate_epidemic(cfg: ExperimentConfig, models, tree: BoxTree, front):
    s = cfg.epidemic
    v = s.validation
    rng = np.random.default_rng(_seed(cfg, PHASE_VALIDATE, 0))
    U = rng.uniform(s.lower, s.upper, (v.test_points, 2))
    times, paths = abm_paths(cfg, U, v.ensemble, _seed(cfg, PHASE_VALIDATE, 1))
    cost = infection_burden(s, times, paths)  # (P, n)
    z = z_value(v.confidence)
    f1 = cost.mean(axis=1)
    h1 = z * cost.std(axis=1, ddof=1) / np.sqrt(v.ensemble)
    abm_F = np.column_stack([f1, economic_cost(U, s.T, s.u_w_max)])
    half = np.column_stack([h1, np.zeros(len(U))])
    surrogate_F = epidemic_evaluator(cfg, models)(U)
    front_F = np.array([p.objectives for p in front if not p.failed])
    report = classify(tree, front_F, U, abm_F, half, surrogate_F, v.confidence)
    mean_path_cost = infection_burden(s, times, paths.mean(axis=2))
    jensen = float(np.max(np.abs(mean_path_cost - f1))) if len(U) else 0.0
    return report, jensen


def quadrature_check(cfg: ExperimentConfig, models, U) -> float:
    """Largest relative change of the infection objective when the step is halved."""
    s = cfg.epidemic
    a = epidemic_evaluator(cfg, models)(U)[:, 0]
    half = cfg.model_copy(update={"epidemic": s.model_copy(update={"objective_dt": s.objective_dt / 2})})
    b = epidemic_evaluator(half, models)(U)[:, 0]
    ok = np.isfinite(a) & np.isfinite(b)
    return float(np.max(np.abs(a[ok] - b[ok]) / np.abs(b[ok]))) if ok.any() else float("nan")


@dataclass
class EpidemicResult:
    models: EpidemicModels
    tree: BoxTree
    archive: ParetoArchive
    front: list
    validation: ValidationReport | None
    rmse: list
    report: dict = field(default_factory=dict)


def run_epidemic_moo(cfg: ExperimentConfig, out=None, resume: bool = True, validate: bool = True) -> EpidemicResult:
    s = cfg.epidemic
    run = RunDirectory(out) if out is not None else None
    checkpoints = Checkpoints(out, cfg.digest(), resume) if out is not None else None
    models = learn_epidemic_models(cfg, checkpoints)
    rmse = rmse_table(cfg, models, run)
    evaluator = epidemic_evaluator(cfg, models)
    data = checkpoints.load("epidemic-moo") if checkpoints else None
    stats = None
    if data is not None:
        tree = BoxTree.restore(s.lower, s.upper, int(data["depth"]), data["cells"], data["history"])
        archive = ParetoArchive.restore(data["X"], data["F"])
    else:
        seed = int(_seed(cfg, PHASE_MOO).generate_state(1)[0])
        tree, archive, stats = sampling_algorithm(s.lower, s.upper, evaluator, s.iterations, s.samples_per_box, seed)
        if checkpoints:
            checkpoints.save("epidemic-moo", depth=tree.depth, cells=tree.cells, history=np.array(tree.history), X=archive.X, F=archive.F)
    front = pareto_front(tree, evaluator)
    good = [p for p in front if not p.failed]
    closed = economic_cost(np.array([p.decision for p in good]), s.T, s.u_w_max) if good else np.zeros(0)
    f2 = np.array([p.objectives[1] for p in good])
    fin = np.isfinite(closed)
    report = {
        "experiment": "epidemic-moo",
        "seed": cfg.seed,
        "scale": cfg.scale,
        "config_digest": cfg.digest(),
        "training_points": int(s.grid**2 * int(np.ceil(s.T / (s.subsample * s.dt)))),
        "reduced_model": s.reduced_model,
        "dictionary_sizes": {"augmented-6": models.six.dictionary.size, "augmented-4": models.four.dictionary.size},
        "moo": {
            "leaves": len(tree),
            "iterations": tree.depth,
            "leaf_counts": list(tree.history),
            "archive_size": len(archive),
            "box_width": tree.width,
            "front_points": len(good),
            "failed_centers": len(front) - len(good),
        },
        "economic_closed_form_max_error": float(np.max(np.abs(f2[fin] - closed[fin]), initial=0.0)),
        "quadrature_halving_max_relative_change": quadrature_check(cfg, models, tree.centers()[:20]),
        "rmse": rmse,
    }
    if stats is not None:
        report["moo"].update({k: v for k, v in run_summary(tree, archive, stats).items() if k in ("evaluations", "failures")})
    validation = None
    if validate and s.validation.test_points > 0:
        validation, jensen = validate_epidemic(cfg, models, tree, front)
        report["validation"] = validation.to_dict()
        report["abm_jensen_gap_max"] = jensen
    if run is not None:
        run.json("model.json", {"augmented-6": models.six.to_dict(), "augmented-4": models.four.to_dict()})
        run.json("interpolation.json", {"interpolated-6": models.interp_six.to_dict(), "interpolated-4": models.interp_four.to_dict()})
        run.covering(tree)
        run.front(front, names=["u_s", "u_w"], objective_names=["infection", "economic"])
        run.rmse(rmse)
        run.json("report.json", report)
    return EpidemicResult(models, tree, archive, front, validation, rmse, report)
